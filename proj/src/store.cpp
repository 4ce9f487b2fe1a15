#include "evstore/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evstore/errors.hpp"
#include "evstore/format.hpp"
#include "evstore/hash.hpp"

namespace evstore {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void raise_errno(const std::string& what) {
  raise(ErrorCode::IoError, what + ": " + std::strerror(errno));
}

void fsync_path(const fs::path& p) {
  const int fd = ::open(p.c_str(), O_RDONLY);
  if (fd < 0) raise_errno("open for fsync " + p.string());
  if (::fsync(fd) != 0) {
    ::close(fd);
    raise_errno("fsync " + p.string());
  }
  ::close(fd);
}

void write_all(int fd, const char* data, std::size_t len, const fs::path& p) {
  std::size_t written = 0;
  while (written < len) {
    const ssize_t n = ::write(fd, data + written, len - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      raise_errno("write " + p.string());
    }
    written += static_cast<std::size_t>(n);
  }
}

// Durable append: the bytes are on disk when this returns. On any failure
// the file is truncated back to its previous length so the append is
// all-or-nothing.
void append_bytes_durable(const fs::path& p, const std::string& bytes) {
  const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) raise_errno("open " + p.string());
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    raise_errno("fstat " + p.string());
  }
  try {
    write_all(fd, bytes.data(), bytes.size(), p);
    if (::fsync(fd) != 0) raise_errno("fsync " + p.string());
  } catch (...) {
    ::ftruncate(fd, st.st_size);
    ::close(fd);
    throw;
  }
  ::close(fd);
}

void write_file_atomic(const fs::path& p, const std::string& bytes) {
  const fs::path tmp = p.string() + ".tmp";
  {
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) raise_errno("open " + tmp.string());
    try {
      write_all(fd, bytes.data(), bytes.size(), tmp);
      if (::fsync(fd) != 0) raise_errno("fsync " + tmp.string());
    } catch (...) {
      ::close(fd);
      ::unlink(tmp.c_str());
      throw;
    }
    ::close(fd);
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp, ec);
    raise(ErrorCode::IoError, "rename " + tmp.string() + " -> " + p.string() + ": " + ec.message());
  }
  fsync_path(p.parent_path());
}

std::string read_file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + p.string());
  std::ostringstream out;
  out << in.rdbuf();
  return std::move(out).str();
}

Json policy_to_json(const ImmutabilityPolicy& policy) {
  Json j = Json::object();
  j["degree"] = degree_name(policy.degree);
  j["backup_required_on_mutation"] = policy.backup_required_on_mutation;
  j["archive_exemption"] = policy.archive_exemption;
  return j;
}

ImmutabilityPolicy policy_from_json(const Json& j) {
  ImmutabilityPolicy policy;
  const auto degree = degree_from_name(j.value("degree", std::string()));
  if (!degree) raise(ErrorCode::StoreCorrupt, "manifest: unknown immutability degree");
  policy.degree = *degree;
  policy.backup_required_on_mutation = j.value("backup_required_on_mutation", false);
  policy.archive_exemption = j.value("archive_exemption", false);
  if (policy.degree == ImmutabilityDegree::CutOff) policy.backup_required_on_mutation = true;
  return policy;
}

}  // namespace

const char* degree_name(ImmutabilityDegree degree) {
  switch (degree) {
    case ImmutabilityDegree::Strict: return "strict";
    case ImmutabilityDegree::CutOff: return "cut_off";
    case ImmutabilityDegree::Mutable: return "mutable";
  }
  return "strict";
}

std::optional<ImmutabilityDegree> degree_from_name(std::string_view name) {
  if (name == "strict") return ImmutabilityDegree::Strict;
  if (name == "cut_off" || name == "cut-off") return ImmutabilityDegree::CutOff;
  if (name == "mutable") return ImmutabilityDegree::Mutable;
  return std::nullopt;
}

const char* mutation_kind_name(MutationRecord::Kind kind) {
  switch (kind) {
    case MutationRecord::Kind::Insert: return "insert";
    case MutationRecord::Kind::Update: return "update";
    case MutationRecord::Kind::Delete: return "delete";
    case MutationRecord::Kind::Archive: return "archive";
  }
  return "insert";
}

namespace {

std::optional<MutationRecord::Kind> mutation_kind_from_name(std::string_view name) {
  if (name == "insert") return MutationRecord::Kind::Insert;
  if (name == "update") return MutationRecord::Kind::Update;
  if (name == "delete") return MutationRecord::Kind::Delete;
  if (name == "archive") return MutationRecord::Kind::Archive;
  return std::nullopt;
}

}  // namespace

struct EventStore::StreamState {
  std::string id;
  std::optional<std::string> type;
  std::uint64_t archived_through = 0;
  std::vector<std::string> archives;
  std::vector<SequencedEvent> entries;
  mutable std::mutex mu;

  std::uint64_t length() const { return archived_through + entries.size(); }
};

EventStore::~EventStore() = default;

std::unique_ptr<EventStore> EventStore::init(const fs::path& root, const std::string& store_id,
                                             const ImmutabilityPolicy& policy,
                                             const std::optional<std::string>& schema_binding) {
  if (!is_valid_stream_id(store_id)) {
    raise(ErrorCode::InvalidArgument, "invalid store id '" + store_id + "'");
  }
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) raise(ErrorCode::IoError, "cannot create " + root.string() + ": " + ec.message());
  if (fs::exists(root / format::kManifestFile)) {
    raise(ErrorCode::InvalidArgument, "store already initialized at " + root.string());
  }
  fs::create_directories(root / format::kBackupDir);
  fs::create_directories(root / format::kArchiveDir);

  auto store = std::unique_ptr<EventStore>(new EventStore());
  store->root_ = root;
  store->store_id_ = store_id;
  store->policy_ = policy;
  if (store->policy_.degree == ImmutabilityDegree::CutOff) {
    store->policy_.backup_required_on_mutation = true;
  }
  store->bound_schema_ = schema_binding;
  store->write_manifest();
  return store;
}

std::unique_ptr<EventStore> EventStore::open(const fs::path& root, OpenReport* report) {
  const fs::path manifest_path = root / format::kManifestFile;
  if (!fs::exists(manifest_path)) {
    raise(ErrorCode::StoreCorrupt, "no store manifest at " + manifest_path.string());
  }
  const std::string manifest_text = read_file_bytes(manifest_path);
  Json manifest;
  try {
    manifest = format::read_json_line(manifest_text, "manifest");
  } catch (const Error&) {
    raise(ErrorCode::StoreCorrupt, "manifest is not valid JSON");
  }
  if (!manifest.is_object() || !manifest.contains("format") ||
      !manifest["format"].is_number_unsigned()) {
    raise(ErrorCode::StoreCorrupt, "manifest missing format version");
  }
  if (manifest["format"].get<std::uint64_t>() != format::kFormatVersion) {
    raise(ErrorCode::UnknownFormatVersion,
          "manifest format version " + manifest["format"].dump() + " is not supported");
  }

  auto store = std::unique_ptr<EventStore>(new EventStore());
  store->root_ = root;
  store->store_id_ = manifest.value("store", std::string("store"));
  store->policy_ = policy_from_json(manifest.value("policy", Json::object()));
  if (manifest.contains("schema") && manifest["schema"].is_string()) {
    store->bound_schema_ = manifest["schema"].get<std::string>();
  }

  const Json streams = manifest.value("streams", Json::object());
  for (const auto& [stream_id, meta] : streams.items()) {
    auto state = std::make_unique<StreamState>();
    state->id = stream_id;
    if (meta.contains("type") && meta["type"].is_string()) {
      state->type = meta["type"].get<std::string>();
    }
    state->archived_through = meta.value("archived_through", std::uint64_t(0));
    for (const auto& name : meta.value("archives", Json::array())) {
      state->archives.push_back(name.get<std::string>());
    }

    const fs::path log = store->stream_log_path(stream_id);
    if (fs::exists(log)) {
      auto scan = format::scan_stream_log(log, state->archived_through + 1, stream_id);
      if (scan.torn_tail) {
        fs::resize_file(log, scan.valid_bytes);
        if (report) report->recovered_streams.push_back(stream_id);
      }
      state->entries = std::move(scan.entries);
    }
    store->streams_.emplace(stream_id, std::move(state));
  }

  // Mutation journal; tolerate a torn final line the same way.
  const fs::path journal = root / format::kJournalFile;
  if (fs::exists(journal)) {
    const std::string bytes = read_file_bytes(journal);
    std::size_t pos = 0;
    std::uint64_t line_number = 0;
    while (pos < bytes.size()) {
      const std::size_t nl = bytes.find('\n', pos);
      if (nl == std::string::npos) {
        fs::resize_file(journal, pos);
        if (report) report->journal_recovered = true;
        break;
      }
      ++line_number;
      Json j = Json::parse(std::string_view(bytes.data() + pos, nl - pos), nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        raise(ErrorCode::StoreCorrupt, "journal line " + std::to_string(line_number) + " is malformed");
      }
      MutationRecord rec;
      const auto kind = mutation_kind_from_name(j.value("kind", std::string()));
      if (!kind) {
        raise(ErrorCode::StoreCorrupt, "journal line " + std::to_string(line_number) + ": unknown kind");
      }
      rec.kind = *kind;
      rec.stream_id = j.value("stream", std::string());
      rec.position = j.value("pos", std::uint64_t(0));
      if (j.contains("backup") && j["backup"].is_string()) {
        rec.backup_id = j["backup"].get<std::string>();
      }
      store->journal_.push_back(std::move(rec));
      pos = nl + 1;
    }
  }
  return store;
}

EventStore::StreamState* EventStore::find_stream(const std::string& stream_id) const {
  std::shared_lock lk(map_mu_);
  const auto it = streams_.find(stream_id);
  return it == streams_.end() ? nullptr : it->second.get();
}

EventStore::StreamState& EventStore::require_stream(const std::string& stream_id) const {
  StreamState* s = find_stream(stream_id);
  if (!s) raise(ErrorCode::UnknownStream, "stream '" + stream_id + "' does not exist");
  return *s;
}

fs::path EventStore::stream_log_path(const std::string& stream_id) const {
  return root_ / (stream_id + ".log");
}

void EventStore::create_stream(const std::string& stream_id,
                               const std::optional<std::string>& stream_type) {
  if (!is_valid_stream_id(stream_id)) {
    raise(ErrorCode::InvalidArgument, "invalid stream id '" + stream_id + "'");
  }
  {
    std::unique_lock lk(map_mu_);
    if (streams_.contains(stream_id)) {
      raise(ErrorCode::DuplicateStream, "stream '" + stream_id + "' already exists");
    }
    auto state = std::make_unique<StreamState>();
    state->id = stream_id;
    state->type = stream_type;
    streams_.emplace(stream_id, std::move(state));
  }
  append_bytes_durable(stream_log_path(stream_id), "");
  fsync_path(root_);
  write_manifest();
}

void EventStore::set_stream_type(const std::string& stream_id, const std::string& stream_type) {
  StreamState& s = require_stream(stream_id);
  {
    std::scoped_lock lk(s.mu, manifest_mu_);
    s.type = stream_type;
  }
  write_manifest();
}

std::vector<SequencedEvent> EventStore::append(const std::string& stream_id,
                                               std::uint64_t expected_sequence,
                                               const std::vector<Event>& events) {
  if (events.empty()) raise(ErrorCode::InvalidArgument, "append requires at least one event");
  for (const Event& e : events) validate_event(e);

  StreamState& s = require_stream(stream_id);
  std::lock_guard lk(s.mu);
  const std::uint64_t next = s.length() + 1;
  if (expected_sequence != next) {
    raise(ErrorCode::ConcurrencyConflict, "expected " + std::to_string(next));
  }

  std::vector<SequencedEvent> appended;
  appended.reserve(events.size());
  std::string buffer;
  std::uint64_t seq = expected_sequence;
  for (const Event& e : events) {
    appended.push_back(SequencedEvent{e, seq++});
    buffer += format::encode_record(appended.back());
  }
  append_bytes_durable(stream_log_path(stream_id), buffer);
  s.entries.insert(s.entries.end(), appended.begin(), appended.end());
  return appended;
}

std::vector<SequencedEvent> EventStore::read(const std::string& stream_id,
                                             std::uint64_t from_sequence) const {
  if (from_sequence < 1) raise(ErrorCode::InvalidArgument, "from_sequence must be >= 1");
  StreamState& s = require_stream(stream_id);
  std::lock_guard lk(s.mu);
  std::vector<SequencedEvent> out;
  for (const SequencedEvent& entry : s.entries) {
    if (entry.sequence >= from_sequence) out.push_back(entry);
  }
  return out;
}

std::vector<SequencedEvent> EventStore::read_stitched(const std::string& stream_id,
                                                      std::uint64_t from_sequence) const {
  if (from_sequence < 1) raise(ErrorCode::InvalidArgument, "from_sequence must be >= 1");
  StreamState& s = require_stream(stream_id);

  std::vector<std::string> archives;
  {
    std::lock_guard lk(manifest_mu_);
    archives = s.archives;
  }
  std::vector<SequencedEvent> out;
  std::uint64_t expected = 1;
  for (const std::string& name : archives) {
    auto scan = format::scan_stream_log(root_ / format::kArchiveDir / name, expected, stream_id);
    if (scan.torn_tail) {
      raise(ErrorCode::StoreCorrupt, "archive file '" + name + "' is truncated");
    }
    for (SequencedEvent& entry : scan.entries) {
      ++expected;
      if (entry.sequence >= from_sequence) out.push_back(std::move(entry));
    }
  }
  std::lock_guard lk(s.mu);
  if (expected != s.archived_through + 1) {
    raise(ErrorCode::StoreCorrupt, "archive files for stream '" + stream_id +
                                       "' do not cover sequences up to " +
                                       std::to_string(s.archived_through));
  }
  for (const SequencedEvent& entry : s.entries) {
    if (entry.sequence >= from_sequence) out.push_back(entry);
  }
  return out;
}

void EventStore::check_mutation_allowed(const std::optional<std::string>& backup_id) const {
  if (policy_.degree == ImmutabilityDegree::Strict) {
    raise(ErrorCode::ImmutabilityViolation,
          "immutability policy 'strict' forbids in-place mutation");
  }
  if (policy_.backup_required_on_mutation) {
    if (!backup_id) {
      raise(ErrorCode::ImmutabilityViolation,
            "policy requires a recorded backup before mutation");
    }
    if (!has_backup(*backup_id)) {
      raise(ErrorCode::ImmutabilityViolation, "backup '" + *backup_id + "' is not recorded");
    }
  }
}

void EventStore::rewrite_stream_file(StreamState& stream,
                                     const std::vector<SequencedEvent>& entries) {
  std::string bytes;
  for (const SequencedEvent& entry : entries) {
    bytes += format::encode_record(entry);
  }
  write_file_atomic(stream_log_path(stream.id), bytes);
}

void EventStore::apply_mutation(const std::string& stream_id, MutationRecord::Kind kind,
                                std::uint64_t position, const Event* event,
                                const std::optional<std::string>& backup_id) {
  MutationRecord record{stream_id, kind, position, backup_id};
  {
    StreamState& s = require_stream(stream_id);
    std::lock_guard lk(s.mu);
    check_mutation_allowed(backup_id);

    const std::uint64_t base = s.archived_through;
    const std::uint64_t length = s.length();
    const std::uint64_t max_pos = kind == MutationRecord::Kind::Insert ? length + 1 : length;
    if (position < base + 1 || position > max_pos) {
      raise(ErrorCode::PositionOutOfRange,
            "position " + std::to_string(position) + " outside mutable range " +
                std::to_string(base + 1) + ".." + std::to_string(max_pos));
    }
    if (event) validate_event(*event);

    std::vector<SequencedEvent> updated = s.entries;
    const std::size_t idx = static_cast<std::size_t>(position - base - 1);
    switch (kind) {
      case MutationRecord::Kind::Insert:
        updated.insert(updated.begin() + static_cast<std::ptrdiff_t>(idx),
                       SequencedEvent{*event, 0});
        break;
      case MutationRecord::Kind::Update:
        updated[idx].event = *event;
        break;
      case MutationRecord::Kind::Delete:
        updated.erase(updated.begin() + static_cast<std::ptrdiff_t>(idx));
        break;
      case MutationRecord::Kind::Archive:
        break;
    }
    // Renumbering keeps sequences consecutive; this is exactly why dependent
    // checkpoints lose their meaning and listeners must invalidate them.
    for (std::size_t i = 0; i < updated.size(); ++i) {
      updated[i].sequence = base + i + 1;
    }
    rewrite_stream_file(s, updated);
    s.entries = std::move(updated);
    append_journal_record(record);
  }
  notify_listeners(record);
}

void EventStore::insert_at(const std::string& stream_id, std::uint64_t position,
                           const Event& event, const std::optional<std::string>& backup_id) {
  apply_mutation(stream_id, MutationRecord::Kind::Insert, position, &event, backup_id);
}

void EventStore::update_at(const std::string& stream_id, std::uint64_t position,
                           const Event& event, const std::optional<std::string>& backup_id) {
  apply_mutation(stream_id, MutationRecord::Kind::Update, position, &event, backup_id);
}

void EventStore::delete_at(const std::string& stream_id, std::uint64_t position,
                           const std::optional<std::string>& backup_id) {
  apply_mutation(stream_id, MutationRecord::Kind::Delete, position, nullptr, backup_id);
}

std::string EventStore::create_backup(const std::string& stream_id) {
  StreamState& s = require_stream(stream_id);
  std::lock_guard lk(s.mu);
  const std::string bytes = read_file_bytes(stream_log_path(stream_id));
  const std::string id = sha256_hex(bytes);
  const fs::path target = backup_path(id);
  if (!fs::exists(target)) {
    write_file_atomic(target, bytes);
  }
  return id;
}

bool EventStore::has_backup(const std::string& backup_id) const {
  return fs::exists(backup_path(backup_id));
}

fs::path EventStore::backup_path(const std::string& backup_id) const {
  return root_ / format::kBackupDir / backup_id;
}

std::vector<SequencedEvent> EventStore::read_backup(const std::string& backup_id) const {
  const fs::path file = backup_path(backup_id);
  if (!fs::exists(file)) {
    raise(ErrorCode::InvalidArgument, "backup '" + backup_id + "' is not recorded");
  }
  const std::string bytes = read_file_bytes(file);
  std::vector<SequencedEvent> out;
  std::size_t pos = 0;
  std::uint64_t line_number = 0;
  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) break;
    ++line_number;
    out.push_back(format::decode_record(std::string_view(bytes.data() + pos, nl - pos),
                                        line_number, pos));
    pos = nl + 1;
  }
  return out;
}

std::string EventStore::archive_prefix(const std::string& stream_id,
                                       std::uint64_t before_sequence) {
  if (policy_.degree == ImmutabilityDegree::Strict && !policy_.archive_exemption) {
    raise(ErrorCode::ImmutabilityViolation,
          "immutability policy 'strict' forbids archiving without an archive exemption");
  }
  MutationRecord record;
  std::string archive_name;
  {
    StreamState& s = require_stream(stream_id);
    std::lock_guard lk(s.mu);
    const std::uint64_t base = s.archived_through;
    const std::uint64_t length = s.length();
    if (before_sequence < base + 2 || before_sequence > length + 1) {
      raise(ErrorCode::PositionOutOfRange,
            "archive boundary " + std::to_string(before_sequence) + " outside range " +
                std::to_string(base + 2) + ".." + std::to_string(length + 1));
    }
    const std::size_t count = static_cast<std::size_t>(before_sequence - 1 - base);
    archive_name = stream_id + "." + std::to_string(base + 1) + "-" +
                   std::to_string(before_sequence - 1) + ".log";

    std::string archive_bytes;
    for (std::size_t i = 0; i < count; ++i) {
      archive_bytes += format::encode_record(s.entries[i]);
    }
    write_file_atomic(root_ / format::kArchiveDir / archive_name, archive_bytes);

    std::vector<SequencedEvent> remaining(s.entries.begin() + static_cast<std::ptrdiff_t>(count),
                                          s.entries.end());
    rewrite_stream_file(s, remaining);
    {
      std::lock_guard mlk(manifest_mu_);
      s.archived_through = before_sequence - 1;
      s.archives.push_back(archive_name);
    }
    write_manifest();
    s.entries = std::move(remaining);

    record = MutationRecord{stream_id, MutationRecord::Kind::Archive, before_sequence,
                            archive_name};
    append_journal_record(record);
  }
  notify_listeners(record);
  return archive_name;
}

bool EventStore::has_stream(const std::string& stream_id) const {
  return find_stream(stream_id) != nullptr;
}

StreamInfo EventStore::stream_info(const std::string& stream_id) const {
  StreamState& s = require_stream(stream_id);
  std::scoped_lock lk(s.mu, manifest_mu_);
  StreamInfo info;
  info.stream_id = s.id;
  info.stream_type = s.type;
  info.archived_through = s.archived_through;
  info.archives = s.archives;
  info.live_count = s.entries.size();
  info.length = s.length();
  return info;
}

std::vector<StreamInfo> EventStore::streams() const {
  std::vector<std::string> ids;
  {
    std::shared_lock lk(map_mu_);
    ids.reserve(streams_.size());
    for (const auto& [id, _] : streams_) ids.push_back(id);
  }
  std::vector<StreamInfo> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) out.push_back(stream_info(id));
  return out;
}

std::uint64_t EventStore::stream_length(const std::string& stream_id) const {
  StreamState& s = require_stream(stream_id);
  std::lock_guard lk(s.mu);
  return s.length();
}

void EventStore::write_manifest() const {
  std::lock_guard lk(manifest_mu_);
  Json manifest = Json::object();
  manifest["format"] = format::kFormatVersion;
  manifest["store"] = store_id_;
  manifest["policy"] = policy_to_json(policy_);
  manifest["schema"] = bound_schema_ ? Json(*bound_schema_) : Json(nullptr);
  Json streams = Json::object();
  {
    std::shared_lock mlk(map_mu_);
    for (const auto& [id, state] : streams_) {
      Json meta = Json::object();
      meta["type"] = state->type ? Json(*state->type) : Json(nullptr);
      meta["archived_through"] = state->archived_through;
      meta["archives"] = state->archives;
      streams[id] = std::move(meta);
    }
  }
  manifest["streams"] = std::move(streams);
  write_file_atomic(root_ / format::kManifestFile, manifest.dump() + "\n");
}

void EventStore::append_journal_record(const MutationRecord& record) {
  Json j = Json::object();
  j["kind"] = mutation_kind_name(record.kind);
  j["stream"] = record.stream_id;
  j["pos"] = record.position;
  j["backup"] = record.backup_id ? Json(*record.backup_id) : Json(nullptr);
  std::lock_guard lk(journal_mu_);
  append_bytes_durable(root_ / format::kJournalFile, j.dump() + "\n");
  journal_.push_back(record);
}

std::vector<MutationRecord> EventStore::mutation_journal() const {
  std::lock_guard lk(journal_mu_);
  return journal_;
}

void EventStore::add_mutation_listener(MutationListener listener) {
  std::lock_guard lk(listeners_mu_);
  listeners_.push_back(std::move(listener));
}

void EventStore::notify_listeners(const MutationRecord& record) {
  std::vector<MutationListener> listeners;
  {
    std::lock_guard lk(listeners_mu_);
    listeners = listeners_;
  }
  for (const auto& listener : listeners) listener(record);
}

StoreStats EventStore::stats() const {
  StoreStats out;
  for (const StreamInfo& info : streams()) {
    ++out.stream_count;
    out.archived_count += info.archived_through;
    StreamState& s = require_stream(info.stream_id);
    std::lock_guard lk(s.mu);
    for (const SequencedEvent& entry : s.entries) {
      ++out.event_count;
      ++out.events_per_type[entry.event.type];
    }
  }
  for (const auto& dirent : fs::recursive_directory_iterator(root_)) {
    if (dirent.is_regular_file()) {
      out.store_bytes += dirent.file_size();
    }
  }
  return out;
}

std::string EventStore::stream_content_hash(const std::string& stream_id) const {
  StreamState& s = require_stream(stream_id);
  std::lock_guard lk(s.mu);
  return sha256_file_hex(stream_log_path(stream_id));
}

std::string EventStore::content_hash() const {
  std::vector<std::string> ids;
  {
    std::shared_lock lk(map_mu_);
    for (const auto& [id, _] : streams_) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  Sha256 h;
  for (const std::string& id : ids) {
    h.update(id);
    h.update("\n");
    h.update(stream_content_hash(id));
    h.update("\n");
  }
  return h.hex_digest();
}

}  // namespace evstore
