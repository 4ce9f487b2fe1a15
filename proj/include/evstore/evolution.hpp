#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evstore/errors.hpp"
#include "evstore/event.hpp"
#include "evstore/schema.hpp"
#include "evstore/store.hpp"

namespace evstore::evolution {

// Single-step read-time transformer: consumes an event at from_version and
// yields events at from_version + 1 (possibly none, possibly several).
// Steps compose into chains; gaps are detected per event type.
struct Upcaster {
  std::string event_type;
  std::uint64_t from_version = 1;
  std::function<std::vector<Event>(const Event&)> transform;

  std::uint64_t to_version() const { return from_version + 1; }
};

// Applies every applicable upcaster until each event reaches the target
// version for its type (events without a target pass through). Raises
// MissingUpcaster when a version gap has no step.
std::vector<Event> upcast_event(const Event& event, const std::vector<Upcaster>& chain,
                                const std::map<std::string, std::uint64_t>& target_versions);

// Lazy view of a stream at target versions. The store is never written; when
// splits change the event count the view is renumbered consecutively from
// the first input sequence, leaving stored sequences untouched.
std::vector<SequencedEvent> upcast_stream(const std::vector<SequencedEvent>& entries,
                                          const std::vector<Upcaster>& chain,
                                          const std::map<std::string, std::uint64_t>& target_versions);

enum class Technique { VersionedEvents, WeakSchema, Upcast, InPlace, CopyTransform };

const char* technique_name(Technique technique);
std::optional<Technique> technique_from_name(std::string_view name);

struct PlanAction {
  enum class Kind { AddType, AddFieldWithDefault, RenameField, SplitEvent, DropEvent };
  Kind kind = Kind::AddType;
  std::string event_type;
  // Only events below to_version are rewritten; match_version narrows to one
  // stored version.
  std::optional<std::uint64_t> match_version;
  std::uint64_t to_version = 1;

  std::string field;       // AddFieldWithDefault, RenameField
  Json default_value;      // AddFieldWithDefault
  std::string rename_to;   // RenameField

  struct SplitPart {
    std::string event_type;
    std::vector<std::string> fields;  // payload fields carried into the part
  };
  std::vector<SplitPart> parts;  // SplitEvent
};

const char* action_kind_name(PlanAction::Kind kind);

struct MigrationPlan {
  Technique technique = Technique::CopyTransform;
  std::uint64_t source_schema_version = 0;
  std::uint64_t target_schema_version = 0;
  std::vector<PlanAction> actions;
  std::vector<std::string> scope_streams;  // empty = whole store
};

MigrationPlan load_plan(const std::filesystem::path& file);
MigrationPlan parse_plan(const std::string& text, const std::string& context);
void save_plan(const MigrationPlan& plan, const std::filesystem::path& file);
std::string serialize_plan(const MigrationPlan& plan);

// Interprets rewrite actions as an upcaster chain plus target versions, so
// upcast plans can run from the CLI without hand-written transforms.
std::pair<std::vector<Upcaster>, std::map<std::string, std::uint64_t>> upcasters_from_plan(
    const MigrationPlan& plan);

struct StreamMigration {
  std::string stream_id;
  bool migrated = false;
  std::uint64_t events_in = 0;
  std::uint64_t events_out = 0;
  std::uint64_t mutations = 0;  // journal records produced (in-place only)
  std::optional<std::string> backup_id;
  // Audit lineage: old sequence -> new sequences (empty = dropped).
  std::map<std::uint64_t, std::vector<std::uint64_t>> lineage;
  std::string error;  // set when this stream failed
};

struct MigrationReport {
  Technique technique = Technique::CopyTransform;
  bool dry_run = false;
  std::vector<StreamMigration> streams;
  std::uint64_t events_in = 0;
  std::uint64_t events_out = 0;
  // Filled when a target schema was supplied for verification.
  std::optional<bool> target_conforms;
  std::vector<schema::Violation> violations;

  Json to_json() const;
};

class TransformError : public Error {
 public:
  TransformError(const std::string& message, MigrationReport report)
      : Error(ErrorCode::TransformFailure, message), report(std::move(report)) {}
  MigrationReport report;
};

struct CompatibilityResult {
  bool compatible = false;
  std::string reason;  // set when incompatible
};

// Technique 1: no store access — compatible iff the new schema is a superset,
// so every store conforming to the old schema conforms to the new one.
CompatibilityResult check_versioned_events(const schema::StoreSchema& older,
                                           const schema::StoreSchema& newer);

// Technique 2: tolerant reader over one serialized event. Unknown fields are
// retained but ignored; missing optional fields are filled from schema
// defaults; a missing required field without a default is ToleranceExceeded.
Event weak_read(std::string_view raw, const schema::EventSchema& schema);
Event weak_read_event(const Event& event, const schema::EventSchema& schema);

// Technique 4: rewrites scoped streams through the store's mutation
// operations. Stream-level atomicity: each stream is transformed fully or
// left untouched; a failure stops the run and throws TransformError carrying
// the partial report. When `target` is given each rewritten stream is
// verified against it before any mutation is applied.
MigrationReport in_place_transform(EventStore& store, const MigrationPlan& plan,
                                   const schema::StoreSchema* target = nullptr,
                                   bool dry_run = false);

struct CopyResult {
  MigrationReport report;
  std::unique_ptr<EventStore> target;  // null on dry runs
};

// Technique 5: writes transformed streams into a fresh store, leaving the
// source byte-identical. The target is created atomically or not at all.
CopyResult copy_transform(const EventStore& source, const MigrationPlan& plan,
                          const std::filesystem::path& target_root,
                          const std::string& target_store_id,
                          const schema::StoreSchema* target_schema = nullptr,
                          bool dry_run = false);

// Prevention: cold storage. Returns the archive file reference.
std::string archive_cold(EventStore& store, const std::string& stream_id,
                         std::uint64_t before_sequence);

}  // namespace evstore::evolution
