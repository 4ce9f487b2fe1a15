#include "evstore/cqrs.hpp"

#include <algorithm>
#include <chrono>

#include "evstore/errors.hpp"

namespace evstore::cqrs {
namespace {

struct MergeRef {
  const std::string* stream_id;
  const SequencedEvent* entry;
};

// Deterministic cross-stream merge: ascending (sequence, stream id). Streams
// are disjoint, so any fixed rule is admissible; this one makes folds exact
// to test.
std::vector<MergeRef> merge_order(
    const std::vector<std::pair<std::string, std::vector<SequencedEvent>>>& streams,
    const std::map<std::string, std::uint64_t>& from) {
  std::vector<MergeRef> refs;
  for (const auto& [stream_id, entries] : streams) {
    const auto it = from.find(stream_id);
    const std::uint64_t after = it == from.end() ? 0 : it->second;
    for (const SequencedEvent& entry : entries) {
      if (entry.sequence > after) refs.push_back({&stream_id, &entry});
    }
  }
  std::sort(refs.begin(), refs.end(), [](const MergeRef& a, const MergeRef& b) {
    if (a.entry->sequence != b.entry->sequence) return a.entry->sequence < b.entry->sequence;
    return *a.stream_id < *b.stream_id;
  });
  return refs;
}

}  // namespace

const char* projection_mode_name(ProjectionMode mode) {
  switch (mode) {
    case ProjectionMode::OnDemand: return "on_demand";
    case ProjectionMode::PreBuilt: return "pre_built";
    case ProjectionMode::Synchronous: return "synchronous";
  }
  return "on_demand";
}

std::optional<ProjectionMode> projection_mode_from_name(std::string_view name) {
  if (name == "on_demand") return ProjectionMode::OnDemand;
  if (name == "pre_built") return ProjectionMode::PreBuilt;
  if (name == "synchronous") return ProjectionMode::Synchronous;
  return std::nullopt;
}

bool StreamSelector::matches(const StreamInfo& info) const {
  if (!stream_ids.empty()) {
    return std::find(stream_ids.begin(), stream_ids.end(), info.stream_id) != stream_ids.end();
  }
  if (stream_type) {
    return info.stream_type && *info.stream_type == *stream_type;
  }
  return true;
}

Projection project(const std::vector<std::pair<std::string, std::vector<SequencedEvent>>>& streams,
                   const ProjectorDefinition& def, const Projection* resume) {
  Projection out;
  out.projection_id = def.name;
  out.state = resume ? resume->state : def.initial_state;
  if (resume) out.checkpoint = resume->checkpoint;

  for (const MergeRef& ref : merge_order(streams, out.checkpoint)) {
    out.state = def.fold(std::move(out.state), *ref.stream_id, *ref.entry);
    out.checkpoint[*ref.stream_id] = ref.entry->sequence;
  }
  return out;
}

AcceptOutcome accept(const Projection& projection, const Command& command,
                     const AcceptRule& rule) {
  if (!projection.valid) {
    raise(ErrorCode::InvalidProjection,
          "cannot accept against an invalidated projection; rebuild first");
  }
  return rule(projection.state, command);
}

System::System(EventStore& store) : store_(store) {
  store_.add_mutation_listener([this](const MutationRecord& record) { on_store_mutation(record); });
}

void System::register_aggregate(AggregateDefinition def) {
  std::lock_guard lk(mu_);
  if (def.name.empty() || !def.fold || !def.accept) {
    raise(ErrorCode::InvalidArgument, "aggregate needs a name, a fold step and an accept rule");
  }
  for (const std::string& command_type : def.handled_commands) {
    if (command_routes_.contains(command_type)) {
      raise(ErrorCode::InvalidArgument,
            "command type '" + command_type + "' is already routed");
    }
  }
  for (const std::string& command_type : def.handled_commands) {
    command_routes_[command_type] = def.name;
  }
  aggregates_[def.name] = std::move(def);
}

void System::register_projector(ProjectorDefinition def) {
  std::lock_guard lk(mu_);
  if (def.name.empty() || !def.fold) {
    raise(ErrorCode::InvalidArgument, "projector needs a name and a fold step");
  }
  if (projectors_.contains(def.name)) {
    raise(ErrorCode::InvalidArgument, "projector '" + def.name + "' is already registered");
  }
  auto ps = std::make_unique<ProjectorState>();
  ps->projection.projection_id = def.name;
  ps->projection.state = def.initial_state;
  ps->def = std::move(def);
  projectors_[ps->def.name] = std::move(ps);
}

void System::register_query(const std::string& query_name, const std::string& projector_name,
                            std::function<Json(const Json&, const Json&)> extract) {
  std::lock_guard lk(mu_);
  if (!projectors_.contains(projector_name)) {
    raise(ErrorCode::UnknownProjector, "projector '" + projector_name + "' is not registered");
  }
  if (!extract) {
    extract = [](const Json& state, const Json&) { return state; };
  }
  queries_[query_name] = QueryDef{projector_name, std::move(extract)};
}

bool System::has_command_type(const std::string& command_type) const {
  std::lock_guard lk(mu_);
  return command_routes_.contains(command_type);
}

bool System::has_projector(const std::string& name) const {
  std::lock_guard lk(mu_);
  return projectors_.contains(name);
}

bool System::has_query(const std::string& name) const {
  std::lock_guard lk(mu_);
  return queries_.contains(name);
}

std::vector<std::pair<std::string, ProjectionMode>> System::projector_names() const {
  std::lock_guard lk(mu_);
  std::vector<std::pair<std::string, ProjectionMode>> out;
  for (const auto& [name, ps] : projectors_) {
    out.emplace_back(name, ps->def.mode);
  }
  return out;
}

const AggregateDefinition& System::route(const std::string& command_type) const {
  const auto it = command_routes_.find(command_type);
  if (it == command_routes_.end()) {
    raise(ErrorCode::UnknownCommandType, "no aggregate handles '" + command_type + "'");
  }
  return aggregates_.at(it->second);
}

std::vector<std::pair<std::string, std::vector<SequencedEvent>>> System::matched_streams(
    const StreamSelector& selector) const {
  std::vector<std::pair<std::string, std::vector<SequencedEvent>>> out;
  for (const StreamInfo& info : store_.streams()) {
    if (selector.matches(info)) {
      out.emplace_back(info.stream_id, store_.read(info.stream_id, 1));
    }
  }
  return out;
}

CommandResult System::handle_command(const Command& command) {
  AggregateDefinition agg;
  {
    std::lock_guard lk(mu_);
    agg = route(command.command_type);
  }
  const std::string stream_id =
      agg.stream_selector ? agg.stream_selector(command) : command.target_stream;
  if (stream_id.empty()) {
    raise(ErrorCode::InvalidArgument, "command does not select a stream");
  }
  if (!store_.has_stream(stream_id)) {
    try {
      store_.create_stream(stream_id, agg.stream_type);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DuplicateStream) throw;  // lost a creation race, fine
    }
  }

  CommandResult result;
  result.stream_id = stream_id;

  // Optimistic path: read, fold, decide, then append with the sequence we
  // observed. A concurrent writer makes the append fail, never the store lie.
  std::optional<Snapshot> snap;
  {
    std::lock_guard lk(mu_);
    const auto it = snapshots_.find(snapshot_key(agg.name, stream_id));
    if (it != snapshots_.end()) snap = it->second;
  }
  const StreamInfo info = store_.stream_info(stream_id);
  const std::uint64_t from = snap ? snap->sequence + 1 : 1;
  const std::vector<SequencedEvent> entries = store_.read(stream_id, from);

  Json state = snap ? snap->state : agg.initial_state;
  std::uint64_t last_seq = snap ? snap->sequence : info.archived_through;
  for (const SequencedEvent& entry : entries) {
    state = agg.fold(std::move(state), stream_id, entry);
    last_seq = entry.sequence;
  }

  Projection projection;
  projection.projection_id = agg.name + ":" + stream_id;
  projection.state = std::move(state);
  if (last_seq > 0) projection.checkpoint[stream_id] = last_seq;

  AcceptOutcome outcome = accept(projection, command, agg.accept);
  if (auto* rejection = std::get_if<Rejection>(&outcome)) {
    result.status = CommandResult::Status::Rejected;
    result.rejection = *rejection;
    return result;
  }

  auto& events = std::get<std::vector<Event>>(outcome);
  if (events.empty()) {
    result.status = CommandResult::Status::Accepted;
    return result;
  }

  const std::uint64_t expected = command.expected_sequence.value_or(last_seq + 1);
  std::vector<SequencedEvent> appended;
  try {
    appended = store_.append(stream_id, expected, events);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ConcurrencyConflict) throw;
    result.status = CommandResult::Status::Conflict;
    result.conflict_message = e.detail();
    return result;
  }

  result.status = CommandResult::Status::Accepted;
  result.appended = appended;

  std::lock_guard lk(mu_);
  if (agg.snapshot_interval && *agg.snapshot_interval > 0) {
    Json next_state = projection.state;
    for (const SequencedEvent& entry : appended) {
      next_state = agg.fold(std::move(next_state), stream_id, entry);
    }
    const std::uint64_t last = appended.back().sequence;
    const std::string key = snapshot_key(agg.name, stream_id);
    const std::uint64_t snapped_at = snap ? snap->sequence : 0;
    if (last - snapped_at >= *agg.snapshot_interval) {
      snapshots_[key] = Snapshot{std::move(next_state), last};
    }
  }
  // Synchronous projections reflect the new events before the command
  // returns; there is no window to observe.
  for (auto& [name, ps] : projectors_) {
    if (ps->def.mode != ProjectionMode::Synchronous) continue;
    if (!ps->projection.valid) continue;
    StreamInfo current = store_.stream_info(stream_id);
    if (ps->def.sources.matches(current)) {
      deliver_locked(*ps, UINT64_MAX);
    }
  }
  return result;
}

void System::maybe_check_conformance(const ProjectorDefinition& def, const std::string& stream_id,
                                     const SequencedEvent& entry) {
  if (!def.strict) return;
  if (!bound_schema_loaded_) {
    bound_schema_loaded_ = true;
    if (store_.bound_schema()) {
      bound_schema_ = schema::load_store_schema(*store_.bound_schema());
    }
  }
  if (!bound_schema_) return;
  const StreamInfo info = store_.stream_info(stream_id);
  if (!info.stream_type) {
    raise(ErrorCode::NonConformingEvent,
          "strict projector '" + def.name + "': stream '" + stream_id + "' has no type tag");
  }
  const schema::StreamSchema* ss = bound_schema_->find_stream_schema(*info.stream_type);
  const schema::EventSchema* es =
      ss ? ss->find_event_schema(entry.event.type, entry.event.version) : nullptr;
  if (!es) {
    raise(ErrorCode::NonConformingEvent,
          "strict projector '" + def.name + "': no event schema for type " + entry.event.type +
              " v" + std::to_string(entry.event.version));
  }
  const auto check = schema::conforms_event(entry.event, *es);
  if (!check.conforms()) {
    raise(ErrorCode::NonConformingEvent,
          "strict projector '" + def.name + "': event at sequence " +
              std::to_string(entry.sequence) + " violates its schema: " +
              check.violations.front().message);
  }
}

std::uint64_t System::deliver_locked(ProjectorState& ps, std::uint64_t max_events) {
  if (!ps.projection.valid) {
    raise(ErrorCode::InvalidProjection, "projection '" + ps.def.name +
                                            "' was invalidated by a store mutation; rebuild first");
  }
  auto streams = matched_streams(ps.def.sources);
  std::vector<MergeRef> refs = merge_order(streams, ps.projection.checkpoint);
  std::uint64_t delivered = 0;
  for (const MergeRef& ref : refs) {
    if (delivered == max_events) break;
    maybe_check_conformance(ps.def, *ref.stream_id, *ref.entry);
    ps.projection.state = ps.def.fold(std::move(ps.projection.state), *ref.stream_id, *ref.entry);
    ps.projection.checkpoint[*ref.stream_id] = ref.entry->sequence;
    ++delivered;
  }
  return delivered;
}

std::uint64_t System::deliver(const std::string& projector_name, std::uint64_t max_events) {
  std::lock_guard lk(mu_);
  const auto it = projectors_.find(projector_name);
  if (it == projectors_.end()) {
    raise(ErrorCode::UnknownProjector, "projector '" + projector_name + "' is not registered");
  }
  if (it->second->def.mode == ProjectionMode::OnDemand) {
    raise(ErrorCode::InvalidArgument,
          "projector '" + projector_name + "' is on-demand and keeps no projection");
  }
  return deliver_locked(*it->second, max_events);
}

std::uint64_t System::quiesce() {
  std::lock_guard lk(mu_);
  std::uint64_t total = 0;
  for (auto& [name, ps] : projectors_) {
    if (ps->def.mode == ProjectionMode::OnDemand) continue;
    if (!ps->projection.valid) continue;  // needs an explicit rebuild
    total += deliver_locked(*ps, UINT64_MAX);
  }
  return total;
}

std::uint64_t System::window(const std::string& projector_name) const {
  std::lock_guard lk(mu_);
  const auto it = projectors_.find(projector_name);
  if (it == projectors_.end()) {
    raise(ErrorCode::UnknownProjector, "projector '" + projector_name + "' is not registered");
  }
  const ProjectorState& ps = *it->second;
  if (ps.def.mode == ProjectionMode::OnDemand) return 0;
  std::uint64_t pending = 0;
  for (const StreamInfo& info : store_.streams()) {
    if (!ps.def.sources.matches(info)) continue;
    const auto cp = ps.projection.checkpoint.find(info.stream_id);
    const std::uint64_t seen = cp == ps.projection.checkpoint.end()
                                   ? info.archived_through
                                   : cp->second;
    if (info.length > seen) pending += info.length - seen;
  }
  return pending;
}

QueryResult System::handle_query(const std::string& query_name, const Json& params) {
  std::lock_guard lk(mu_);
  const auto qit = queries_.find(query_name);
  if (qit == queries_.end()) {
    raise(ErrorCode::UnknownQuery, "no query named '" + query_name + "'");
  }
  ProjectorState& ps = *projectors_.at(qit->second.projector);

  QueryResult result;
  result.mode = ps.def.mode;
  if (ps.def.mode == ProjectionMode::OnDemand) {
    // Steps: read the streams, build the projection, then answer.
    Projection fresh = rebuild_projection(ps, {}, nullptr);
    result.value = qit->second.extract(fresh.state, params);
    result.checkpoint = fresh.checkpoint;
    result.lag = 0;
    return result;
  }
  if (!ps.projection.valid) {
    raise(ErrorCode::InvalidProjection, "projection '" + ps.def.name +
                                            "' was invalidated by a store mutation; rebuild first");
  }
  result.value = qit->second.extract(ps.projection.state, params);
  result.checkpoint = ps.projection.checkpoint;
  std::uint64_t pending = 0;
  for (const StreamInfo& info : store_.streams()) {
    if (!ps.def.sources.matches(info)) continue;
    const auto cp = ps.projection.checkpoint.find(info.stream_id);
    const std::uint64_t seen =
        cp == ps.projection.checkpoint.end() ? info.archived_through : cp->second;
    if (info.length > seen) pending += info.length - seen;
  }
  result.lag = pending;
  return result;
}

Projection System::rebuild_projection(ProjectorState& ps, const std::vector<std::string>& scope,
                                      RebuildStats* stats) {
  const auto started = std::chrono::steady_clock::now();
  auto streams = matched_streams(ps.def.sources);

  if (!scope.empty()) {
    for (const std::string& wanted : scope) {
      const bool known = std::any_of(streams.begin(), streams.end(),
                                     [&](const auto& s) { return s.first == wanted; });
      if (!known) {
        raise(ErrorCode::InvalidArgument, "stream '" + wanted + "' is not a source of projector '" +
                                              ps.def.name + "'");
      }
    }
  }
  const auto in_scope = [&](const std::string& stream_id) {
    return scope.empty() ||
           std::find(scope.begin(), scope.end(), stream_id) != scope.end();
  };

  Projection next;
  next.projection_id = ps.def.name;
  next.state = ps.def.initial_state;
  std::uint64_t processed = 0;

  std::vector<std::pair<std::string, std::vector<SequencedEvent>>> folded;
  for (auto& [stream_id, entries] : streams) {
    if (in_scope(stream_id)) {
      folded.emplace_back(stream_id, std::move(entries));
      continue;
    }
    // Outside the scope: re-fold only up to the existing checkpoint and
    // leave that checkpoint untouched.
    const auto cp = ps.projection.checkpoint.find(stream_id);
    if (cp == ps.projection.checkpoint.end()) continue;
    std::vector<SequencedEvent> prefix;
    for (SequencedEvent& entry : entries) {
      if (entry.sequence <= cp->second) prefix.push_back(std::move(entry));
    }
    folded.emplace_back(stream_id, std::move(prefix));
    next.checkpoint[stream_id] = cp->second;
  }

  for (const MergeRef& ref : merge_order(folded, {})) {
    maybe_check_conformance(ps.def, *ref.stream_id, *ref.entry);
    next.state = ps.def.fold(std::move(next.state), *ref.stream_id, *ref.entry);
    if (in_scope(*ref.stream_id)) next.checkpoint[*ref.stream_id] = ref.entry->sequence;
    ++processed;
  }

  const auto elapsed = std::chrono::steady_clock::now() - started;
  if (stats) {
    stats->events_processed = processed;
    stats->duration_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed).count();
  }
  return next;
}

Projection System::rebuild(const std::string& projector_name) {
  return rebuild(projector_name, {});
}

Projection System::rebuild(const std::string& projector_name,
                           const std::vector<std::string>& scope) {
  std::lock_guard lk(mu_);
  const auto it = projectors_.find(projector_name);
  if (it == projectors_.end()) {
    raise(ErrorCode::UnknownProjector, "projector '" + projector_name + "' is not registered");
  }
  ProjectorState& ps = *it->second;
  RebuildStats stats;
  Projection next = rebuild_projection(ps, scope, &stats);
  next.valid = true;
  ps.projection = next;
  ps.last_rebuild = stats;
  return next;
}

RebuildStats System::last_rebuild(const std::string& projector_name) const {
  std::lock_guard lk(mu_);
  const auto it = projectors_.find(projector_name);
  if (it == projectors_.end()) {
    raise(ErrorCode::UnknownProjector, "projector '" + projector_name + "' is not registered");
  }
  return it->second->last_rebuild;
}

Projection System::projection(const std::string& projector_name) const {
  std::lock_guard lk(mu_);
  const auto it = projectors_.find(projector_name);
  if (it == projectors_.end()) {
    raise(ErrorCode::UnknownProjector, "projector '" + projector_name + "' is not registered");
  }
  return it->second->projection;
}

void System::snapshot_now(const std::string& aggregate_name, const std::string& stream_id) {
  AggregateDefinition agg;
  {
    std::lock_guard lk(mu_);
    const auto it = aggregates_.find(aggregate_name);
    if (it == aggregates_.end()) {
      raise(ErrorCode::InvalidArgument, "aggregate '" + aggregate_name + "' is not registered");
    }
    agg = it->second;
  }
  const StreamInfo info = store_.stream_info(stream_id);
  Json state = agg.initial_state;
  std::uint64_t last_seq = info.archived_through;
  for (const SequencedEvent& entry : store_.read(stream_id, 1)) {
    state = agg.fold(std::move(state), stream_id, entry);
    last_seq = entry.sequence;
  }
  std::lock_guard lk(mu_);
  snapshots_[snapshot_key(aggregate_name, stream_id)] = Snapshot{std::move(state), last_seq};
}

std::optional<Snapshot> System::snapshot(const std::string& aggregate_name,
                                         const std::string& stream_id) const {
  std::lock_guard lk(mu_);
  const auto it = snapshots_.find(snapshot_key(aggregate_name, stream_id));
  if (it == snapshots_.end()) return std::nullopt;
  return it->second;
}

Projection System::load_from_snapshot(const std::string& aggregate_name,
                                      const std::string& stream_id) const {
  std::lock_guard lk(mu_);
  const auto it = snapshots_.find(snapshot_key(aggregate_name, stream_id));
  if (it == snapshots_.end()) {
    raise(ErrorCode::InvalidArgument,
          "no snapshot for aggregate '" + aggregate_name + "' on stream '" + stream_id + "'");
  }
  Projection out;
  out.projection_id = aggregate_name + ":" + stream_id;
  out.state = it->second.state;
  if (it->second.sequence > 0) out.checkpoint[stream_id] = it->second.sequence;
  return out;
}

std::string System::snapshot_key(const std::string& aggregate, const std::string& stream) const {
  return aggregate + ":" + stream;
}

void System::on_store_mutation(const MutationRecord& record) {
  if (record.kind == MutationRecord::Kind::Archive) return;  // sequences unchanged
  std::lock_guard lk(mu_);
  for (auto& [name, ps] : projectors_) {
    if (ps->projection.checkpoint.contains(record.stream_id)) {
      ps->projection.valid = false;
    }
  }
  // Snapshots whose folded prefix was touched are dropped.
  for (auto it = snapshots_.begin(); it != snapshots_.end();) {
    const auto sep = it->first.rfind(':');
    const std::string stream = it->first.substr(sep + 1);
    if (stream == record.stream_id && record.position <= it->second.sequence) {
      it = snapshots_.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace evstore::cqrs
