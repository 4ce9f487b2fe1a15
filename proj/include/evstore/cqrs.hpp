#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "evstore/event.hpp"
#include "evstore/schema.hpp"
#include "evstore/store.hpp"

namespace evstore::cqrs {

struct Command {
  std::string command_type;
  std::string target_stream;
  std::optional<std::uint64_t> expected_sequence;
  Json payload = Json::object();
};

// A domain outcome, not a fault: the command was understood and refused.
struct Rejection {
  std::string reason;
  std::string message;
};

using AcceptOutcome = std::variant<std::vector<Event>, Rejection>;
using AcceptRule = std::function<AcceptOutcome(const Json& state, const Command&)>;

// Fold steps must be deterministic, total over conforming events, and (for
// multi-stream projectors) insensitive to the interleaving of events from
// different streams.
using FoldStep = std::function<Json(Json state, const std::string& stream_id,
                                    const SequencedEvent& entry)>;

struct AggregateDefinition {
  std::string name;
  std::vector<std::string> handled_commands;
  // Which stream a command maps to; defaults to command.target_stream.
  std::function<std::string(const Command&)> stream_selector;
  Json initial_state = Json::object();
  FoldStep fold;
  AcceptRule accept;
  std::optional<std::uint64_t> snapshot_interval;
  // Type tag applied when the target stream is created on first command.
  std::optional<std::string> stream_type;
};

enum class ProjectionMode { OnDemand, PreBuilt, Synchronous };

const char* projection_mode_name(ProjectionMode mode);
std::optional<ProjectionMode> projection_mode_from_name(std::string_view name);

// Source streams of a projector: explicit ids, a stream type tag, or
// (both empty) every stream in the store.
struct StreamSelector {
  std::vector<std::string> stream_ids;
  std::optional<std::string> stream_type;

  bool matches(const StreamInfo& info) const;
  static StreamSelector all() { return {}; }
  static StreamSelector of(std::vector<std::string> ids) { return {std::move(ids), {}}; }
  static StreamSelector by_type(std::string type) { return {{}, std::move(type)}; }
};

struct ProjectorDefinition {
  std::string name;
  StreamSelector sources;
  Json initial_state = Json::object();
  FoldStep fold;
  ProjectionMode mode = ProjectionMode::OnDemand;
  // When true and the store carries a bound schema, folding a non-conforming
  // event raises NonConformingEvent.
  bool strict = false;
};

struct Projection {
  std::string projection_id;
  Json state;
  std::map<std::string, std::uint64_t> checkpoint;  // stream id -> last processed sequence
  bool valid = true;
};

struct CommandResult {
  enum class Status { Accepted, Rejected, Conflict };
  Status status = Status::Accepted;
  std::string stream_id;
  std::vector<SequencedEvent> appended;
  std::optional<Rejection> rejection;
  std::string conflict_message;

  bool accepted() const { return status == Status::Accepted; }
};

struct QueryResult {
  Json value;
  std::map<std::string, std::uint64_t> checkpoint;
  ProjectionMode mode = ProjectionMode::OnDemand;
  // Undelivered events at answer time; staleness made observable.
  std::uint64_t lag = 0;
};

struct Snapshot {
  Json state;
  std::uint64_t sequence = 0;
};

struct RebuildStats {
  std::uint64_t events_processed = 0;
  double duration_ms = 0.0;
};

// Pure fold of (stream id, entries) pairs into a projection. Events within
// one stream are processed in sequence order; across streams the merge is
// deterministic round-robin: ascending (sequence, stream id). When `resume`
// is given, folding continues from its state and checkpoint.
Projection project(const std::vector<std::pair<std::string, std::vector<SequencedEvent>>>& streams,
                   const ProjectorDefinition& def, const Projection* resume = nullptr);

// Pure decision: validates the command against the projection state.
// Requires projection.valid (InvalidProjection otherwise).
AcceptOutcome accept(const Projection& projection, const Command& command,
                     const AcceptRule& rule);

// The command/query runtime over one store: routes commands to aggregates,
// maintains projections in their three modes, tracks checkpoints and
// snapshots, and invalidates both when the store is mutated in place.
class System {
 public:
  explicit System(EventStore& store);

  EventStore& store() { return store_; }

  void register_aggregate(AggregateDefinition def);
  void register_projector(ProjectorDefinition def);
  void register_query(const std::string& query_name, const std::string& projector_name,
                      std::function<Json(const Json& state, const Json& params)> extract = {});

  bool has_command_type(const std::string& command_type) const;
  bool has_projector(const std::string& name) const;
  bool has_query(const std::string& name) const;
  std::vector<std::pair<std::string, ProjectionMode>> projector_names() const;

  // Read -> fold (from snapshot when present) -> accept -> append. Synchronous
  // projections over the stream are updated before this returns. Conflicts
  // are reported, never retried here.
  CommandResult handle_command(const Command& command);

  QueryResult handle_query(const std::string& query_name, const Json& params = Json::object());

  // Folds up to max_events undelivered events into a pre-built projection,
  // in deterministic merge order. Returns the number delivered.
  std::uint64_t deliver(const std::string& projector_name, std::uint64_t max_events);
  // Delivers everything pending to every pre-built projector.
  std::uint64_t quiesce();
  // Undelivered events for a projector (the inconsistency window, in events).
  std::uint64_t window(const std::string& projector_name) const;

  // Recomputes the projection: scope streams are re-read from sequence 1 and
  // advanced to their current length; streams outside the scope are re-folded
  // only up to their existing checkpoints, which are left untouched.
  Projection rebuild(const std::string& projector_name);
  Projection rebuild(const std::string& projector_name, const std::vector<std::string>& scope);
  RebuildStats last_rebuild(const std::string& projector_name) const;

  Projection projection(const std::string& projector_name) const;

  // Aggregate snapshots: (fold state, checkpoint sequence) per stream.
  void snapshot_now(const std::string& aggregate_name, const std::string& stream_id);
  std::optional<Snapshot> snapshot(const std::string& aggregate_name,
                                   const std::string& stream_id) const;
  Projection load_from_snapshot(const std::string& aggregate_name,
                                const std::string& stream_id) const;

 private:
  struct ProjectorState {
    ProjectorDefinition def;
    Projection projection;
    RebuildStats last_rebuild;
  };

  const AggregateDefinition& route(const std::string& command_type) const;
  std::vector<std::pair<std::string, std::vector<SequencedEvent>>> matched_streams(
      const StreamSelector& selector) const;
  void on_store_mutation(const MutationRecord& record);
  std::uint64_t deliver_locked(ProjectorState& ps, std::uint64_t max_events);
  Projection rebuild_projection(ProjectorState& ps, const std::vector<std::string>& scope,
                                RebuildStats* stats);
  void maybe_check_conformance(const ProjectorDefinition& def, const std::string& stream_id,
                               const SequencedEvent& entry);
  std::string snapshot_key(const std::string& aggregate, const std::string& stream) const;

  EventStore& store_;
  std::map<std::string, AggregateDefinition> aggregates_;
  std::map<std::string, std::string> command_routes_;  // command type -> aggregate
  std::map<std::string, std::unique_ptr<ProjectorState>> projectors_;
  struct QueryDef {
    std::string projector;
    std::function<Json(const Json&, const Json&)> extract;
  };
  std::map<std::string, QueryDef> queries_;
  std::map<std::string, Snapshot> snapshots_;
  bool bound_schema_loaded_ = false;
  std::optional<schema::StoreSchema> bound_schema_;
  mutable std::recursive_mutex mu_;
};

}  // namespace evstore::cqrs
