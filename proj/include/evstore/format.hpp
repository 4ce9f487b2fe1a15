#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evstore/event.hpp"

namespace evstore::format {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kManifestFile = "store.meta";
inline constexpr const char* kJournalFile = "journal.log";
inline constexpr const char* kBackupDir = "backups";
inline constexpr const char* kArchiveDir = "archive";
inline constexpr const char* kLockFile = ".lock";

// One record per line: {"seq":,"type":,"v":,"payload":,"meta":} in that key
// order, UTF-8, LF-terminated, no trailing whitespace.
std::string encode_record(const SequencedEvent& entry);

// `line` excludes the terminating LF. `line_number` and `byte_offset` are
// reported in MalformedRecord messages; pass 0 when unknown.
SequencedEvent decode_record(std::string_view line, std::uint64_t line_number = 0,
                             std::uint64_t byte_offset = 0);

struct ScanResult {
  std::vector<SequencedEvent> entries;
  // Byte length of the valid prefix. Smaller than the file size when the
  // final line was torn (no LF or cut mid-record) and recovery dropped it.
  std::uint64_t valid_bytes = 0;
  bool torn_tail = false;
};

// Reads a stream log, tolerating exactly one torn final line. An
// LF-terminated line that does not decode, or a gap/duplicate in the
// sequence numbers, raises StoreCorrupt. `first_sequence` is the sequence
// the first record must carry (archive base + 1).
ScanResult scan_stream_log(const std::filesystem::path& file, std::uint64_t first_sequence,
                           const std::string& stream_id);

// Single-line JSON documents (manifest, schema files, migration plans).
Json read_json_line(const std::string& line, const std::string& context);

}  // namespace evstore::format
