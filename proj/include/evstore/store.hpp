#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "evstore/event.hpp"

namespace evstore {

enum class ImmutabilityDegree { Strict, CutOff, Mutable };

const char* degree_name(ImmutabilityDegree degree);
std::optional<ImmutabilityDegree> degree_from_name(std::string_view name);

struct ImmutabilityPolicy {
  ImmutabilityDegree degree = ImmutabilityDegree::Strict;
  // Forced true when degree == CutOff; may also be enabled on mutable stores.
  bool backup_required_on_mutation = false;
  // Allows archiving on strict stores; the exemption is noted in the journal.
  bool archive_exemption = false;

  static ImmutabilityPolicy strict() { return {ImmutabilityDegree::Strict, false, false}; }
  static ImmutabilityPolicy cut_off() { return {ImmutabilityDegree::CutOff, true, false}; }
  static ImmutabilityPolicy mutable_() { return {ImmutabilityDegree::Mutable, false, false}; }
};

struct MutationRecord {
  enum class Kind { Insert, Update, Delete, Archive };
  std::string stream_id;
  Kind kind;
  std::uint64_t position = 0;
  std::optional<std::string> backup_id;  // archive records carry the archive file ref
};

const char* mutation_kind_name(MutationRecord::Kind kind);

struct StreamInfo {
  std::string stream_id;
  std::optional<std::string> stream_type;
  std::uint64_t archived_through = 0;  // sequences <= this live in archive files
  std::vector<std::string> archives;   // file names under archive/, oldest first
  std::uint64_t live_count = 0;
  std::uint64_t length = 0;  // archived_through + live_count; next sequence is length + 1
};

struct StoreStats {
  std::uint64_t stream_count = 0;
  std::uint64_t event_count = 0;  // live events
  std::uint64_t archived_count = 0;
  std::map<std::string, std::uint64_t> events_per_type;  // live events by type
  std::uint64_t store_bytes = 0;
};

struct OpenReport {
  // Streams whose log ended in a torn line; recovery kept the valid prefix.
  std::vector<std::string> recovered_streams;
  bool journal_recovered = false;
};

// Append-only event store over a directory of per-stream log files. Safe for
// concurrent callers: appends to one stream are arbitrated by the expected-
// sequence check under a per-stream critical section, reads return snapshots.
class EventStore {
 public:
  static std::unique_ptr<EventStore> init(const std::filesystem::path& root,
                                          const std::string& store_id,
                                          const ImmutabilityPolicy& policy,
                                          const std::optional<std::string>& schema_binding = {});
  static std::unique_ptr<EventStore> open(const std::filesystem::path& root,
                                          OpenReport* report = nullptr);

  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;
  ~EventStore();

  const std::string& store_id() const { return store_id_; }
  const std::filesystem::path& root() const { return root_; }
  const ImmutabilityPolicy& policy() const { return policy_; }
  const std::optional<std::string>& bound_schema() const { return bound_schema_; }

  void create_stream(const std::string& stream_id,
                     const std::optional<std::string>& stream_type = {});
  void set_stream_type(const std::string& stream_id, const std::string& stream_type);

  // All events are appended atomically with consecutive sequence numbers
  // starting at expected_sequence, which must equal current length + 1.
  // The record bytes are flushed before this returns.
  std::vector<SequencedEvent> append(const std::string& stream_id,
                                     std::uint64_t expected_sequence,
                                     const std::vector<Event>& events);

  // Live entries with sequence >= from_sequence, in order.
  std::vector<SequencedEvent> read(const std::string& stream_id,
                                   std::uint64_t from_sequence) const;
  // Archive files stitched in front of the live entries.
  std::vector<SequencedEvent> read_stitched(const std::string& stream_id,
                                            std::uint64_t from_sequence) const;

  // Mutation operations. Rejected on strict stores; stores that require
  // backups demand a backup_id recorded beforehand via create_backup.
  // Sequences are renumbered to stay consecutive and a MutationRecord is
  // journaled; registered listeners run after the mutation commits.
  void insert_at(const std::string& stream_id, std::uint64_t position, const Event& event,
                 const std::optional<std::string>& backup_id = {});
  void update_at(const std::string& stream_id, std::uint64_t position, const Event& event,
                 const std::optional<std::string>& backup_id = {});
  void delete_at(const std::string& stream_id, std::uint64_t position,
                 const std::optional<std::string>& backup_id = {});

  // Whole-stream snapshot of the live log bytes, stored under backups/ and
  // identified by content hash. Backups are kept forever.
  std::string create_backup(const std::string& stream_id);
  bool has_backup(const std::string& backup_id) const;
  std::filesystem::path backup_path(const std::string& backup_id) const;
  std::vector<SequencedEvent> read_backup(const std::string& backup_id) const;

  // Moves live events with sequence < before_sequence into an archive file
  // and truncates the live log; sequences are not renumbered. Returns the
  // archive file name. Policy: forbidden on strict stores unless the store
  // carries an archive exemption.
  std::string archive_prefix(const std::string& stream_id, std::uint64_t before_sequence);

  bool has_stream(const std::string& stream_id) const;
  StreamInfo stream_info(const std::string& stream_id) const;
  std::vector<StreamInfo> streams() const;
  std::uint64_t stream_length(const std::string& stream_id) const;

  std::vector<MutationRecord> mutation_journal() const;

  using MutationListener = std::function<void(const MutationRecord&)>;
  void add_mutation_listener(MutationListener listener);

  StoreStats stats() const;

  // Hex digest over the live stream log bytes (sorted by stream id);
  // used to assert that read paths never write.
  std::string content_hash() const;
  std::string stream_content_hash(const std::string& stream_id) const;

 private:
  struct StreamState;

  EventStore() = default;

  StreamState* find_stream(const std::string& stream_id) const;
  StreamState& require_stream(const std::string& stream_id) const;
  void apply_mutation(const std::string& stream_id, MutationRecord::Kind kind,
                      std::uint64_t position, const Event* event,
                      const std::optional<std::string>& backup_id);
  void check_mutation_allowed(const std::optional<std::string>& backup_id) const;
  void rewrite_stream_file(StreamState& stream, const std::vector<SequencedEvent>& entries);
  void write_manifest() const;
  void append_journal_record(const MutationRecord& record);
  std::filesystem::path stream_log_path(const std::string& stream_id) const;
  void notify_listeners(const MutationRecord& record);

  std::filesystem::path root_;
  std::string store_id_;
  ImmutabilityPolicy policy_;
  std::optional<std::string> bound_schema_;

  mutable std::shared_mutex map_mu_;  // guards streams_ structure
  std::map<std::string, std::unique_ptr<StreamState>> streams_;

  mutable std::mutex journal_mu_;
  std::vector<MutationRecord> journal_;

  mutable std::mutex manifest_mu_;

  std::mutex listeners_mu_;
  std::vector<MutationListener> listeners_;
};

}  // namespace evstore
