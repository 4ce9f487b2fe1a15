#include "evstore/format.hpp"

#include <fstream>
#include <sstream>

#include "evstore/errors.hpp"

namespace evstore::format {
namespace {

std::string read_file_bytes(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    raise(ErrorCode::IoError, "cannot open " + file.string());
  }
  std::ostringstream out;
  out << in.rdbuf();
  return std::move(out).str();
}

}  // namespace

std::string encode_record(const SequencedEvent& entry) {
  Json record = Json::object();
  record["seq"] = entry.sequence;
  record["type"] = entry.event.type;
  record["v"] = entry.event.version;
  record["payload"] = entry.event.payload;
  record["meta"] = entry.event.meta;
  std::string line = record.dump();
  line.push_back('\n');
  return line;
}

SequencedEvent decode_record(std::string_view line, std::uint64_t line_number,
                             std::uint64_t byte_offset) {
  const auto fail = [&](const std::string& why) -> SequencedEvent {
    raise(ErrorCode::MalformedRecord, why + " (line " + std::to_string(line_number) +
                                          ", byte offset " + std::to_string(byte_offset) + ")");
  };

  Json record = Json::parse(line, nullptr, false);
  if (record.is_discarded() || !record.is_object()) {
    return fail("record is not a JSON object");
  }
  static const char* kKeys[] = {"seq", "type", "v", "payload", "meta"};
  for (const char* key : kKeys) {
    if (!record.contains(key)) return fail(std::string("missing key '") + key + "'");
  }
  if (record.size() != 5) return fail("unexpected extra keys");
  if (!record["seq"].is_number_unsigned() || record["seq"].get<std::uint64_t>() < 1) {
    return fail("'seq' must be a positive integer");
  }
  if (!record["type"].is_string()) return fail("'type' must be a string");
  if (!record["v"].is_number_unsigned() || record["v"].get<std::uint64_t>() < 1) {
    return fail("'v' must be a positive integer");
  }
  if (!record["payload"].is_object()) return fail("'payload' must be an object");
  if (!record["meta"].is_object()) return fail("'meta' must be an object");

  SequencedEvent entry;
  entry.sequence = record["seq"].get<std::uint64_t>();
  entry.event.type = record["type"].get<std::string>();
  entry.event.version = record["v"].get<std::uint64_t>();
  entry.event.payload = record["payload"];
  entry.event.meta = record["meta"];
  if (!is_valid_event_type(entry.event.type)) {
    return fail("invalid event type '" + entry.event.type + "'");
  }
  return entry;
}

ScanResult scan_stream_log(const std::filesystem::path& file, std::uint64_t first_sequence,
                           const std::string& stream_id) {
  const std::string bytes = read_file_bytes(file);
  ScanResult result;
  std::uint64_t expected = first_sequence;
  std::uint64_t line_number = 0;
  std::size_t pos = 0;

  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) {
      // Torn final line: keep the complete prefix, drop the tail.
      result.torn_tail = true;
      break;
    }
    ++line_number;
    const std::string_view line(bytes.data() + pos, nl - pos);
    SequencedEvent entry;
    try {
      entry = decode_record(line, line_number, pos);
    } catch (const Error& e) {
      raise(ErrorCode::StoreCorrupt,
            "stream '" + stream_id + "': " + e.what());
    }
    if (entry.sequence != expected) {
      if (entry.sequence < expected) {
        raise(ErrorCode::StoreCorrupt, "stream '" + stream_id + "': duplicate or regressing sequence " +
                                           std::to_string(entry.sequence) + " at line " +
                                           std::to_string(line_number));
      }
      raise(ErrorCode::StoreCorrupt,
            "stream '" + stream_id + "': gap at " + std::to_string(expected));
    }
    ++expected;
    result.entries.push_back(std::move(entry));
    pos = nl + 1;
    result.valid_bytes = pos;
  }
  return result;
}

Json read_json_line(const std::string& line, const std::string& context) {
  Json doc = Json::parse(line, nullptr, false);
  if (doc.is_discarded()) {
    raise(ErrorCode::MalformedRecord, context + ": not valid JSON");
  }
  return doc;
}

}  // namespace evstore::format
