#include "evstore/evolution.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "evstore/format.hpp"
#include "evstore/hash.hpp"

namespace evstore::evolution {
namespace {

namespace fs = std::filesystem;

const Upcaster* find_upcaster(const std::vector<Upcaster>& chain, const std::string& event_type,
                              std::uint64_t from_version) {
  for (const Upcaster& u : chain) {
    if (u.event_type == event_type && u.from_version == from_version) return &u;
  }
  return nullptr;
}

void upcast_into(const Event& event, const std::vector<Upcaster>& chain,
                 const std::map<std::string, std::uint64_t>& targets, std::vector<Event>& out,
                 int depth) {
  if (depth > 256) {
    raise(ErrorCode::InvalidArgument, "upcaster chain does not terminate for type '" +
                                          event.type + "'");
  }
  const auto target = targets.find(event.type);
  if (target == targets.end() || event.version >= target->second) {
    out.push_back(event);
    return;
  }
  const Upcaster* step = find_upcaster(chain, event.type, event.version);
  if (!step) {
    raise(ErrorCode::MissingUpcaster, "no upcaster for type '" + event.type + "' from version " +
                                          std::to_string(event.version));
  }
  for (const Event& produced : step->transform(event)) {
    if (produced.version != step->to_version()) {
      raise(ErrorCode::InvalidArgument, "upcaster " + event.type + " v" +
                                            std::to_string(step->from_version) +
                                            " produced an event not at version " +
                                            std::to_string(step->to_version()));
    }
    upcast_into(produced, chain, targets, out, depth + 1);
  }
}

}  // namespace

std::vector<Event> upcast_event(const Event& event, const std::vector<Upcaster>& chain,
                                const std::map<std::string, std::uint64_t>& target_versions) {
  std::vector<Event> out;
  upcast_into(event, chain, target_versions, out, 0);
  return out;
}

std::vector<SequencedEvent> upcast_stream(const std::vector<SequencedEvent>& entries,
                                          const std::vector<Upcaster>& chain,
                                          const std::map<std::string, std::uint64_t>& target_versions) {
  std::vector<SequencedEvent> view;
  if (entries.empty()) return view;
  std::uint64_t seq = entries.front().sequence;
  for (const SequencedEvent& entry : entries) {
    for (Event& e : upcast_event(entry.event, chain, target_versions)) {
      view.push_back(SequencedEvent{std::move(e), seq++});
    }
  }
  return view;
}

const char* technique_name(Technique technique) {
  switch (technique) {
    case Technique::VersionedEvents: return "versioned_events";
    case Technique::WeakSchema: return "weak_schema";
    case Technique::Upcast: return "upcast";
    case Technique::InPlace: return "in_place";
    case Technique::CopyTransform: return "copy_transform";
  }
  return "copy_transform";
}

std::optional<Technique> technique_from_name(std::string_view name) {
  if (name == "versioned_events") return Technique::VersionedEvents;
  if (name == "weak_schema") return Technique::WeakSchema;
  if (name == "upcast") return Technique::Upcast;
  if (name == "in_place") return Technique::InPlace;
  if (name == "copy_transform") return Technique::CopyTransform;
  return std::nullopt;
}

const char* action_kind_name(PlanAction::Kind kind) {
  switch (kind) {
    case PlanAction::Kind::AddType: return "add_type";
    case PlanAction::Kind::AddFieldWithDefault: return "add_field_with_default";
    case PlanAction::Kind::RenameField: return "rename_field";
    case PlanAction::Kind::SplitEvent: return "split_event";
    case PlanAction::Kind::DropEvent: return "drop_event";
  }
  return "add_type";
}

namespace {

std::optional<PlanAction::Kind> action_kind_from_name(std::string_view name) {
  if (name == "add_type") return PlanAction::Kind::AddType;
  if (name == "add_field_with_default") return PlanAction::Kind::AddFieldWithDefault;
  if (name == "rename_field") return PlanAction::Kind::RenameField;
  if (name == "split_event") return PlanAction::Kind::SplitEvent;
  if (name == "drop_event") return PlanAction::Kind::DropEvent;
  return std::nullopt;
}

bool action_applies(const PlanAction& action, const Event& event) {
  if (action.event_type != event.type) return false;
  if (action.match_version) return event.version == *action.match_version;
  return event.version < action.to_version;
}

// Applies one action to one event. Add/rename/drop are 1->1 or 1->0; split
// is 1->many. Returns false (with `error`) when the event cannot be
// transformed, which fails the whole stream.
bool apply_action(const PlanAction& action, const Event& event, std::vector<Event>& out,
                  std::string& error) {
  switch (action.kind) {
    case PlanAction::Kind::AddType:
      out.push_back(event);  // schema-only change, events pass through
      return true;
    case PlanAction::Kind::DropEvent:
      return true;
    case PlanAction::Kind::AddFieldWithDefault: {
      Event e = event;
      if (!e.payload.contains(action.field)) {
        e.payload[action.field] = action.default_value;
      }
      e.version = action.to_version;
      out.push_back(std::move(e));
      return true;
    }
    case PlanAction::Kind::RenameField: {
      if (!event.payload.contains(action.field)) {
        error = "event of type " + event.type + " lacks field '" + action.field + "' to rename";
        return false;
      }
      Event e = event;
      Json renamed = Json::object();
      for (const auto& [key, value] : event.payload.items()) {
        renamed[key == action.field ? action.rename_to : key] = value;
      }
      e.payload = std::move(renamed);
      e.version = action.to_version;
      out.push_back(std::move(e));
      return true;
    }
    case PlanAction::Kind::SplitEvent: {
      for (const PlanAction::SplitPart& part : action.parts) {
        Event e;
        e.type = part.event_type;
        e.version = action.to_version;
        e.meta = event.meta;
        for (const std::string& field : part.fields) {
          if (event.payload.contains(field)) e.payload[field] = event.payload[field];
        }
        out.push_back(std::move(e));
      }
      return true;
    }
  }
  error = "unknown action";
  return false;
}

// Transforms one event through the whole action list. An event matched by
// several actions is rewritten by each in plan order.
bool transform_event(const MigrationPlan& plan, const Event& event, std::vector<Event>& out,
                     std::string& error) {
  std::vector<Event> current{event};
  for (const PlanAction& action : plan.actions) {
    std::vector<Event> next;
    for (const Event& e : current) {
      if (!action_applies(action, e)) {
        next.push_back(e);
        continue;
      }
      if (!apply_action(action, e, next, error)) return false;
    }
    current = std::move(next);
  }
  out.insert(out.end(), current.begin(), current.end());
  return true;
}

std::vector<std::string> scoped_streams(const EventStore& store, const MigrationPlan& plan) {
  std::vector<std::string> ids;
  for (const StreamInfo& info : store.streams()) {
    if (plan.scope_streams.empty() ||
        std::find(plan.scope_streams.begin(), plan.scope_streams.end(), info.stream_id) !=
            plan.scope_streams.end()) {
      ids.push_back(info.stream_id);
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct TransformedStream {
  std::vector<SequencedEvent> old_entries;
  std::vector<Event> new_events;
  std::map<std::uint64_t, std::vector<std::uint64_t>> lineage;  // renumbered from base+1
};

bool transform_stream(const MigrationPlan& plan, const std::vector<SequencedEvent>& entries,
                      std::uint64_t base, TransformedStream& out, std::string& error) {
  out.old_entries = entries;
  std::uint64_t next_seq = base + 1;
  for (const SequencedEvent& entry : entries) {
    std::vector<Event> produced;
    if (!transform_event(plan, entry.event, produced, error)) {
      error = "sequence " + std::to_string(entry.sequence) + ": " + error;
      return false;
    }
    auto& mapped = out.lineage[entry.sequence];
    for (Event& e : produced) {
      validate_event(e);
      mapped.push_back(next_seq++);
      out.new_events.push_back(std::move(e));
    }
  }
  return true;
}

}  // namespace

CompatibilityResult check_versioned_events(const schema::StoreSchema& older,
                                           const schema::StoreSchema& newer) {
  if (const auto gap = schema::schema_superset_gap(older, newer)) {
    return {false, "not a superset: " + *gap};
  }
  return {true, ""};
}

Event weak_read_event(const Event& event, const schema::EventSchema& schema) {
  Event out = event;
  for (const schema::FieldSpec& field : schema.fields) {
    if (out.payload.contains(field.name)) continue;
    if (field.default_value) {
      out.payload[field.name] = *field.default_value;
      continue;
    }
    if (field.required) {
      raise(ErrorCode::ToleranceExceeded,
            "required field '" + field.name + "' is missing and has no default; " +
                "this change is beyond weak schema, escalate to an upcaster");
    }
  }
  return out;
}

Event weak_read(std::string_view raw, const schema::EventSchema& schema) {
  Json doc = Json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    raise(ErrorCode::MalformedRecord, "weak_read input is not a JSON object");
  }
  Event event;
  if (!doc.contains("type") || !doc["type"].is_string()) {
    raise(ErrorCode::MalformedRecord, "weak_read input lacks an event envelope ('type')");
  }
  event.type = doc["type"].get<std::string>();
  event.version = doc.value("v", std::uint64_t(1));
  if (doc.contains("payload") && doc["payload"].is_object()) event.payload = doc["payload"];
  if (doc.contains("meta") && doc["meta"].is_object()) event.meta = doc["meta"];
  return weak_read_event(event, schema);
}

std::pair<std::vector<Upcaster>, std::map<std::string, std::uint64_t>> upcasters_from_plan(
    const MigrationPlan& plan) {
  std::vector<Upcaster> chain;
  std::map<std::string, std::uint64_t> targets;
  for (const PlanAction& action : plan.actions) {
    if (action.kind == PlanAction::Kind::AddType) continue;
    const std::uint64_t from =
        action.match_version ? *action.match_version
                             : (action.to_version > 1 ? action.to_version - 1 : 1);
    Upcaster u;
    u.event_type = action.event_type;
    u.from_version = from;
    PlanAction step = action;
    step.to_version = from + 1;
    u.transform = [step](const Event& e) {
      std::vector<Event> out;
      std::string error;
      if (!apply_action(step, e, out, error)) {
        raise(ErrorCode::TransformFailure, error);
      }
      return out;
    };
    chain.push_back(std::move(u));
    auto& target = targets[action.event_type];
    target = std::max(target, from + 1);
    for (const PlanAction::SplitPart& part : action.parts) {
      auto& part_target = targets[part.event_type];
      part_target = std::max(part_target, from + 1);
    }
  }
  return {std::move(chain), std::move(targets)};
}

MigrationReport in_place_transform(EventStore& store, const MigrationPlan& plan,
                                   const schema::StoreSchema* target, bool dry_run) {
  MigrationReport report;
  report.technique = Technique::InPlace;
  report.dry_run = dry_run;

  if (!dry_run && store.policy().degree == ImmutabilityDegree::Strict) {
    raise(ErrorCode::ImmutabilityViolation,
          "immutability policy 'strict' forbids in-place transformation");
  }

  for (const std::string& stream_id : scoped_streams(store, plan)) {
    StreamMigration sm;
    sm.stream_id = stream_id;
    const StreamInfo info = store.stream_info(stream_id);
    const auto entries = store.read(stream_id, 1);
    sm.events_in = entries.size();

    TransformedStream transformed;
    std::string error;
    if (!transform_stream(plan, entries, info.archived_through, transformed, error)) {
      sm.error = error;
      report.streams.push_back(std::move(sm));
      throw TransformError("stream '" + stream_id + "': " + error, std::move(report));
    }
    sm.events_out = transformed.new_events.size();
    sm.lineage = transformed.lineage;

    if (target) {
      std::vector<SequencedEvent> preview;
      std::uint64_t seq = info.archived_through;
      for (const Event& e : transformed.new_events) {
        preview.push_back(SequencedEvent{e, ++seq});
      }
      const schema::StreamSchema* ss =
          info.stream_type ? target->find_stream_schema(*info.stream_type) : nullptr;
      if (ss) {
        auto check = schema::conforms_stream(stream_id, preview, *ss);
        if (!check.conforms()) {
          sm.error = "transformed stream does not conform: " + check.violations.front().message;
          report.streams.push_back(std::move(sm));
          throw TransformError("stream '" + stream_id + "': " + sm.error, std::move(report));
        }
      }
    }

    bool changed = transformed.new_events.size() != entries.size();
    for (std::size_t i = 0; !changed && i < entries.size(); ++i) {
      changed = !(entries[i].event == transformed.new_events[i]);
    }
    if (!dry_run && changed) {
      std::optional<std::string> backup_id;
      if (store.policy().backup_required_on_mutation) {
        backup_id = store.create_backup(stream_id);
        sm.backup_id = backup_id;
      }
      // Rewrite through the store's own mutation operations so every change
      // is journaled: update in place while both versions overlap, then
      // insert or delete the tail difference.
      const std::uint64_t base = info.archived_through;
      const std::size_t old_count = entries.size();
      const std::size_t new_count = transformed.new_events.size();
      const std::size_t overlap = std::min(old_count, new_count);
      for (std::size_t i = 0; i < overlap; ++i) {
        if (entries[i].event == transformed.new_events[i]) continue;  // already in shape
        store.update_at(stream_id, base + i + 1, transformed.new_events[i], backup_id);
        ++sm.mutations;
      }
      for (std::size_t i = overlap; i < new_count; ++i) {
        store.insert_at(stream_id, base + i + 1, transformed.new_events[i], backup_id);
        ++sm.mutations;
      }
      for (std::size_t i = old_count; i > overlap; --i) {
        store.delete_at(stream_id, base + i, backup_id);
        ++sm.mutations;
      }
      sm.migrated = true;
    } else if (!dry_run) {
      sm.migrated = true;  // already in target shape
    }
    report.events_in += sm.events_in;
    report.events_out += sm.events_out;
    report.streams.push_back(std::move(sm));
  }

  if (target && !dry_run) {
    auto check = schema::conforms_store(store, *target);
    report.target_conforms = check.conforms();
    report.violations = std::move(check.violations);
  }
  return report;
}

CopyResult copy_transform(const EventStore& source, const MigrationPlan& plan,
                          const fs::path& target_root, const std::string& target_store_id,
                          const schema::StoreSchema* target_schema, bool dry_run) {
  CopyResult result;
  result.report.technique = Technique::CopyTransform;
  result.report.dry_run = dry_run;

  if (!dry_run && fs::exists(target_root)) {
    raise(ErrorCode::InvalidArgument, "target store path already exists: " + target_root.string());
  }

  struct Prepared {
    std::string stream_id;
    std::optional<std::string> stream_type;
    std::vector<Event> events;
  };
  std::vector<Prepared> prepared;

  for (const std::string& stream_id : scoped_streams(source, plan)) {
    StreamMigration sm;
    sm.stream_id = stream_id;
    const StreamInfo info = source.stream_info(stream_id);
    const auto entries = source.read(stream_id, 1);
    sm.events_in = entries.size();

    // Target streams are fresh: numbering restarts at 1.
    TransformedStream transformed;
    std::string error;
    if (!transform_stream(plan, entries, 0, transformed, error)) {
      sm.error = error;
      result.report.streams.push_back(std::move(sm));
      throw TransformError("stream '" + stream_id + "': " + error, std::move(result.report));
    }
    sm.events_out = transformed.new_events.size();
    sm.lineage = transformed.lineage;
    sm.migrated = !dry_run;
    result.report.events_in += sm.events_in;
    result.report.events_out += sm.events_out;
    result.report.streams.push_back(std::move(sm));
    prepared.push_back({stream_id, info.stream_type, std::move(transformed.new_events)});
  }

  if (dry_run) return result;

  // Build under a temporary name and rename into place, so a failure leaves
  // no target behind and the source is never touched.
  const fs::path staging = target_root.string() + ".staging";
  std::error_code ec;
  fs::remove_all(staging, ec);
  try {
    auto target = EventStore::init(staging, target_store_id, source.policy(), {});
    for (const Prepared& p : prepared) {
      target->create_stream(p.stream_id, p.stream_type);
      if (!p.events.empty()) {
        target->append(p.stream_id, 1, p.events);
      }
    }
    target.reset();
    fs::rename(staging, target_root);
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }

  result.target = EventStore::open(target_root);
  if (target_schema) {
    auto check = schema::conforms_store(*result.target, *target_schema);
    result.report.target_conforms = check.conforms();
    result.report.violations = std::move(check.violations);
  }
  return result;
}

std::string archive_cold(EventStore& store, const std::string& stream_id,
                         std::uint64_t before_sequence) {
  return store.archive_prefix(stream_id, before_sequence);
}

Json MigrationReport::to_json() const {
  Json j = Json::object();
  j["technique"] = technique_name(technique);
  j["dry_run"] = dry_run;
  j["events_in"] = events_in;
  j["events_out"] = events_out;
  Json streams = Json::array();
  for (const StreamMigration& sm : this->streams) {
    Json s = Json::object();
    s["stream"] = sm.stream_id;
    s["migrated"] = sm.migrated;
    s["events_in"] = sm.events_in;
    s["events_out"] = sm.events_out;
    s["mutations"] = sm.mutations;
    s["backup"] = sm.backup_id ? Json(*sm.backup_id) : Json(nullptr);
    Json lineage = Json::object();
    for (const auto& [old_seq, new_seqs] : sm.lineage) {
      lineage[std::to_string(old_seq)] = new_seqs;
    }
    s["lineage"] = std::move(lineage);
    if (!sm.error.empty()) s["error"] = sm.error;
    streams.push_back(std::move(s));
  }
  j["streams"] = std::move(streams);
  if (target_conforms) {
    j["target_conforms"] = *target_conforms;
    Json violations = Json::array();
    for (const schema::Violation& v : this->violations) {
      Json vj = Json::object();
      vj["stream"] = v.stream_id;
      vj["seq"] = v.sequence;
      vj["rule"] = v.rule;
      vj["message"] = v.message;
      violations.push_back(std::move(vj));
    }
    j["violations"] = std::move(violations);
  }
  return j;
}

std::string serialize_plan(const MigrationPlan& plan) {
  std::string out;
  Json header = Json::object();
  header["format"] = 1;
  header["kind"] = "migration_plan";
  header["technique"] = technique_name(plan.technique);
  header["source_schema_version"] = plan.source_schema_version;
  header["target_schema_version"] = plan.target_schema_version;
  header["scope"] = plan.scope_streams;
  out += header.dump() + "\n";
  for (const PlanAction& action : plan.actions) {
    Json a = Json::object();
    a["kind"] = "action";
    a["action"] = action_kind_name(action.kind);
    a["event_type"] = action.event_type;
    if (action.match_version) a["match_version"] = *action.match_version;
    a["to_version"] = action.to_version;
    switch (action.kind) {
      case PlanAction::Kind::AddFieldWithDefault:
        a["field"] = action.field;
        a["default"] = action.default_value;
        break;
      case PlanAction::Kind::RenameField:
        a["field"] = action.field;
        a["rename_to"] = action.rename_to;
        break;
      case PlanAction::Kind::SplitEvent: {
        Json parts = Json::array();
        for (const PlanAction::SplitPart& part : action.parts) {
          Json p = Json::object();
          p["event_type"] = part.event_type;
          p["fields"] = part.fields;
          parts.push_back(std::move(p));
        }
        a["parts"] = std::move(parts);
        break;
      }
      default:
        break;
    }
    out += a.dump() + "\n";
  }
  return out;
}

MigrationPlan parse_plan(const std::string& text, const std::string& context) {
  MigrationPlan plan;
  bool header_seen = false;
  std::istringstream in(text);
  std::string line;
  std::uint64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      raise(ErrorCode::MalformedRecord,
            context + " line " + std::to_string(line_number) + " is not a JSON object");
    }
    if (!header_seen) {
      if (j.value("kind", std::string()) != "migration_plan") {
        raise(ErrorCode::MalformedRecord, context + ": first line must be the migration_plan header");
      }
      if (j.value("format", std::uint64_t(0)) != 1) {
        raise(ErrorCode::UnknownFormatVersion, context + ": unsupported plan format version");
      }
      const auto technique = technique_from_name(j.value("technique", std::string()));
      if (!technique) {
        raise(ErrorCode::InvalidArgument, context + ": unknown technique");
      }
      plan.technique = *technique;
      plan.source_schema_version = j.value("source_schema_version", std::uint64_t(0));
      plan.target_schema_version = j.value("target_schema_version", std::uint64_t(0));
      for (const auto& s : j.value("scope", Json::array())) {
        plan.scope_streams.push_back(s.get<std::string>());
      }
      header_seen = true;
      continue;
    }
    if (j.value("kind", std::string()) != "action") {
      raise(ErrorCode::MalformedRecord,
            context + " line " + std::to_string(line_number) + ": expected an action entry");
    }
    PlanAction action;
    const auto kind = action_kind_from_name(j.value("action", std::string()));
    if (!kind) {
      raise(ErrorCode::InvalidArgument,
            context + " line " + std::to_string(line_number) + ": unknown action");
    }
    action.kind = *kind;
    action.event_type = j.value("event_type", std::string());
    if (j.contains("match_version")) {
      action.match_version = j["match_version"].get<std::uint64_t>();
    }
    action.to_version = j.value("to_version", std::uint64_t(1));
    action.field = j.value("field", std::string());
    if (j.contains("default")) action.default_value = j["default"];
    action.rename_to = j.value("rename_to", std::string());
    for (const auto& p : j.value("parts", Json::array())) {
      PlanAction::SplitPart part;
      part.event_type = p.value("event_type", std::string());
      for (const auto& f : p.value("fields", Json::array())) {
        part.fields.push_back(f.get<std::string>());
      }
      action.parts.push_back(std::move(part));
    }
    plan.actions.push_back(std::move(action));
  }
  if (!header_seen) {
    raise(ErrorCode::MalformedRecord, context + ": empty migration plan");
  }
  return plan;
}

MigrationPlan load_plan(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open plan file " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_plan(std::move(buf).str(), file.filename().string());
}

void save_plan(const MigrationPlan& plan, const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write plan file " + file.string());
  out << serialize_plan(plan);
  if (!out.flush()) raise(ErrorCode::IoError, "failed writing plan file " + file.string());
}

}  // namespace evstore::evolution
