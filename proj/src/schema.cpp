#include "evstore/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "evstore/errors.hpp"
#include "evstore/store.hpp"

namespace evstore::schema {
namespace {

bool contains_rule(const std::vector<OrderingRule>& rules, const OrderingRule& rule) {
  return std::find(rules.begin(), rules.end(), rule) != rules.end();
}

bool declares_event_type(const StreamSchema& schema, const std::string& event_type) {
  return std::any_of(schema.event_schemas.begin(), schema.event_schemas.end(),
                     [&](const EventSchema& e) { return e.event_type == event_type; });
}

}  // namespace

const char* field_kind_name(FieldKind kind) {
  switch (kind) {
    case FieldKind::String: return "string";
    case FieldKind::Integer: return "integer";
    case FieldKind::Decimal: return "decimal";
    case FieldKind::Boolean: return "boolean";
    case FieldKind::Timestamp: return "timestamp";
    case FieldKind::List: return "list";
    case FieldKind::Map: return "map";
  }
  return "string";
}

std::optional<FieldKind> field_kind_from_name(std::string_view name) {
  if (name == "string") return FieldKind::String;
  if (name == "integer") return FieldKind::Integer;
  if (name == "decimal") return FieldKind::Decimal;
  if (name == "boolean") return FieldKind::Boolean;
  if (name == "timestamp") return FieldKind::Timestamp;
  if (name == "list") return FieldKind::List;
  if (name == "map") return FieldKind::Map;
  return std::nullopt;
}

const char* rule_kind_name(RuleKind kind) {
  switch (kind) {
    case RuleKind::Precedes: return "precedes";
    case RuleKind::AtMostOnce: return "at_most_once";
    case RuleKind::Initial: return "initial";
    case RuleKind::Terminal: return "terminal";
  }
  return "precedes";
}

std::optional<RuleKind> rule_kind_from_name(std::string_view name) {
  if (name == "precedes") return RuleKind::Precedes;
  if (name == "at_most_once") return RuleKind::AtMostOnce;
  if (name == "initial") return RuleKind::Initial;
  if (name == "terminal") return RuleKind::Terminal;
  return std::nullopt;
}

std::string OrderingRule::describe() const {
  std::string out = rule_kind_name(kind);
  out += "(" + subject;
  if (object) out += ", " + *object;
  out += ")";
  return out;
}

const FieldSpec* EventSchema::find_field(const std::string& name) const {
  for (const FieldSpec& f : fields) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const EventSchema* StreamSchema::find_event_schema(const std::string& event_type,
                                                   std::uint64_t version) const {
  for (const EventSchema& e : event_schemas) {
    if (e.event_type == event_type && e.version == version) return &e;
  }
  return nullptr;
}

const StreamSchema* StoreSchema::find_stream_schema(const std::string& stream_type) const {
  for (const StreamSchema& s : stream_schemas) {
    if (s.stream_type == stream_type) return &s;
  }
  return nullptr;
}

bool value_matches_kind(const Json& value, FieldKind kind,
                        const std::optional<FieldKind>& element) {
  switch (kind) {
    case FieldKind::String:
      return value.is_string();
    case FieldKind::Integer:
      return value.is_number_integer() || value.is_number_unsigned();
    case FieldKind::Decimal:
      return value.is_number();
    case FieldKind::Boolean:
      return value.is_boolean();
    case FieldKind::Timestamp:
      // UTC epoch milliseconds.
      return value.is_number_unsigned() ||
             (value.is_number_integer() && value.get<std::int64_t>() >= 0);
    case FieldKind::List:
      if (!value.is_array()) return false;
      if (element) {
        for (const auto& item : value) {
          if (!value_matches_kind(item, *element, {})) return false;
        }
      }
      return true;
    case FieldKind::Map:
      if (!value.is_object()) return false;
      if (element) {
        for (const auto& [_, item] : value.items()) {
          if (!value_matches_kind(item, *element, {})) return false;
        }
      }
      return true;
  }
  return false;
}

ConformanceResult conforms_event(const Event& e, const EventSchema& schema) {
  ConformanceResult result;
  auto violate = [&](const std::string& rule, const std::string& message) {
    result.violations.push_back({"", 0, rule, message});
  };

  if (e.type != schema.event_type) {
    violate("event-type", "event type '" + e.type + "' does not match schema type '" +
                              schema.event_type + "'");
  }
  if (e.version != schema.version) {
    violate("schema-version", "event version " + std::to_string(e.version) +
                                  " does not match schema version " +
                                  std::to_string(schema.version));
  }
  for (const FieldSpec& field : schema.fields) {
    const auto it = e.payload.find(field.name);
    if (it == e.payload.end()) {
      if (field.required) {
        violate("required-field", "missing required field " + field.name);
      }
      continue;
    }
    if (!value_matches_kind(*it, field.kind, field.element)) {
      violate("field-kind", "field " + field.name + " is not a " +
                                std::string(field_kind_name(field.kind)));
    }
  }
  if (schema.strict_content) {
    for (const auto& [key, _] : e.payload.items()) {
      if (!schema.find_field(key)) {
        violate("undeclared-field", "undeclared field " + key + " under strict content");
      }
    }
  }
  return result;
}

ConformanceResult conforms_stream(const std::string& stream_id,
                                  const std::vector<SequencedEvent>& entries,
                                  const StreamSchema& schema) {
  ConformanceResult result;
  auto violate = [&](std::uint64_t seq, const std::string& rule, const std::string& message) {
    result.violations.push_back({stream_id, seq, rule, message});
  };

  for (const SequencedEvent& entry : entries) {
    const EventSchema* es = schema.find_event_schema(entry.event.type, entry.event.version);
    if (!es) {
      violate(entry.sequence, "event-schema",
              "no event schema for type " + entry.event.type + " v" +
                  std::to_string(entry.event.version));
      continue;
    }
    for (const Violation& v : conforms_event(entry.event, *es).violations) {
      violate(entry.sequence, v.rule, v.message);
    }
  }

  for (const OrderingRule& rule : schema.occurrence_patterns) {
    switch (rule.kind) {
      case RuleKind::Precedes: {
        if (!rule.object) break;
        bool subject_seen = false;
        for (const SequencedEvent& entry : entries) {
          if (entry.event.type == *rule.object && !subject_seen) {
            violate(entry.sequence, "precedes",
                    rule.describe() + " violated: '" + *rule.object +
                        "' occurs without an earlier '" + rule.subject + "'");
          }
          if (entry.event.type == rule.subject) subject_seen = true;
        }
        break;
      }
      case RuleKind::AtMostOnce: {
        std::uint64_t count = 0;
        for (const SequencedEvent& entry : entries) {
          if (entry.event.type == rule.subject && ++count == 2) {
            violate(entry.sequence, "at_most_once",
                    rule.describe() + " violated: second occurrence of '" + rule.subject + "'");
          }
        }
        break;
      }
      case RuleKind::Initial: {
        if (!entries.empty() && entries.front().event.type != rule.subject) {
          violate(entries.front().sequence, "initial",
                  rule.describe() + " violated: stream starts with '" +
                      entries.front().event.type + "'");
        }
        break;
      }
      case RuleKind::Terminal: {
        for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
          if (entries[i].event.type == rule.subject) {
            violate(entries[i + 1].sequence, "terminal",
                    rule.describe() + " violated: events follow '" + rule.subject + "'");
          }
        }
        break;
      }
    }
  }
  return result;
}

ConformanceResult conforms_store(const EventStore& store, const StoreSchema& schema) {
  ConformanceResult result;
  const std::vector<StreamInfo> infos = store.streams();

  for (const StreamInfo& info : infos) {
    if (!info.stream_type) {
      raise(ErrorCode::UnassignedStreamType,
            "stream '" + info.stream_id + "' carries no stream_type tag");
    }
    const StreamSchema* ss = schema.find_stream_schema(*info.stream_type);
    if (!ss) {
      result.violations.push_back({info.stream_id, 0, "stream-schema",
                                   "no stream schema for type " + *info.stream_type});
      continue;
    }
    // Archived events are out of the live processing path and exempt.
    auto stream_result = conforms_stream(info.stream_id, store.read(info.stream_id, 1), *ss);
    result.violations.insert(result.violations.end(), stream_result.violations.begin(),
                             stream_result.violations.end());
  }

  for (const CohesionRule& rule : schema.cohesion_rules) {
    for (const StreamInfo& info : infos) {
      if (!info.stream_type || *info.stream_type != rule.when_stream_type) continue;
      const auto entries = store.read(info.stream_id, 1);
      const bool triggered =
          std::any_of(entries.begin(), entries.end(), [&](const SequencedEvent& e) {
            return e.event.type == rule.contains_event;
          });
      if (!triggered) continue;
      const bool satisfied = std::any_of(infos.begin(), infos.end(), [&](const StreamInfo& other) {
        return other.stream_type && *other.stream_type == rule.requires_stream_type;
      });
      if (!satisfied) {
        result.violations.push_back(
            {info.stream_id, 0, "cohesion",
             "stream contains '" + rule.contains_event + "' but no stream of type '" +
                 rule.requires_stream_type + "' exists"});
      }
    }
  }
  return result;
}

std::optional<std::string> schema_superset_gap(const StoreSchema& older,
                                               const StoreSchema& newer) {
  for (const StreamSchema& old_stream : older.stream_schemas) {
    const StreamSchema* new_stream = newer.find_stream_schema(old_stream.stream_type);
    if (!new_stream) {
      return "stream schema '" + old_stream.stream_type + "' is missing from the new schema";
    }
    for (const EventSchema& old_event : old_stream.event_schemas) {
      const EventSchema* new_event =
          new_stream->find_event_schema(old_event.event_type, old_event.version);
      if (!new_event) {
        return "event schema " + old_event.event_type + " v" +
               std::to_string(old_event.version) + " is missing from stream '" +
               old_stream.stream_type + "'";
      }
      if (!(*new_event == old_event)) {
        return "event schema " + old_event.event_type + " v" +
               std::to_string(old_event.version) + " changed in stream '" +
               old_stream.stream_type + "'";
      }
    }
    for (const OrderingRule& rule : old_stream.occurrence_patterns) {
      if (!contains_rule(new_stream->occurrence_patterns, rule)) {
        return "ordering rule " + rule.describe() + " of stream '" + old_stream.stream_type +
               "' is missing from the new schema";
      }
    }
    // Added rules must be vacuous for streams conforming to the old schema,
    // otherwise the no-transformation guarantee would not hold.
    for (const OrderingRule& rule : new_stream->occurrence_patterns) {
      if (contains_rule(old_stream.occurrence_patterns, rule)) continue;
      const std::string* constrained = &rule.subject;
      if (rule.kind == RuleKind::Precedes && rule.object) constrained = &*rule.object;
      if (rule.kind == RuleKind::Initial || declares_event_type(old_stream, *constrained)) {
        return "added rule " + rule.describe() + " on stream '" + old_stream.stream_type +
               "' constrains streams conforming to the old schema";
      }
    }
  }

  for (const CohesionRule& rule : newer.cohesion_rules) {
    const bool carried =
        std::find(older.cohesion_rules.begin(), older.cohesion_rules.end(), rule) !=
        older.cohesion_rules.end();
    if (carried) continue;
    const StreamSchema* old_stream = older.find_stream_schema(rule.when_stream_type);
    if (old_stream && declares_event_type(*old_stream, rule.contains_event)) {
      return "added cohesion rule on '" + rule.when_stream_type +
             "' constrains stores conforming to the old schema";
    }
  }
  return std::nullopt;
}

bool schema_superset(const StoreSchema& older, const StoreSchema& newer) {
  return !schema_superset_gap(older, newer).has_value();
}

namespace {

Json field_to_json(const FieldSpec& field) {
  Json j = Json::object();
  j["name"] = field.name;
  j["kind"] = field_kind_name(field.kind);
  j["required"] = field.required;
  if (field.default_value) j["default"] = *field.default_value;
  if (field.element) j["element"] = field_kind_name(*field.element);
  return j;
}

FieldSpec field_from_json(const Json& j, const std::string& context) {
  FieldSpec field;
  field.name = j.value("name", std::string());
  if (field.name.empty()) {
    raise(ErrorCode::InvalidArgument, context + ": field entry without a name");
  }
  const auto kind = field_kind_from_name(j.value("kind", std::string("string")));
  if (!kind) raise(ErrorCode::InvalidArgument, context + ": unknown field kind");
  field.kind = *kind;
  field.required = j.value("required", false);
  if (j.contains("element")) {
    const auto element = field_kind_from_name(j["element"].get<std::string>());
    if (!element) raise(ErrorCode::InvalidArgument, context + ": unknown element kind");
    field.element = element;
  }
  if (j.contains("default") && !j["default"].is_null()) {
    field.default_value = j["default"];
    if (!value_matches_kind(*field.default_value, field.kind, field.element)) {
      raise(ErrorCode::InvalidArgument,
            context + ": default for field '" + field.name + "' does not match its kind");
    }
  }
  return field;
}

void validate_store_schema(const StoreSchema& schema, const std::string& context) {
  std::set<std::string> stream_types;
  for (const StreamSchema& stream : schema.stream_schemas) {
    if (!stream_types.insert(stream.stream_type).second) {
      raise(ErrorCode::InvalidArgument,
            context + ": duplicate stream type '" + stream.stream_type + "'");
    }
    std::set<std::pair<std::string, std::uint64_t>> events;
    for (const EventSchema& event : stream.event_schemas) {
      if (!events.insert({event.event_type, event.version}).second) {
        raise(ErrorCode::InvalidArgument, context + ": duplicate event schema " +
                                              event.event_type + " v" +
                                              std::to_string(event.version));
      }
      std::set<std::string> names;
      for (const FieldSpec& field : event.fields) {
        if (!names.insert(field.name).second) {
          raise(ErrorCode::InvalidArgument, context + ": duplicate field '" + field.name +
                                                "' in " + event.event_type);
        }
      }
    }
    for (const OrderingRule& rule : stream.occurrence_patterns) {
      if (rule.kind == RuleKind::Precedes) {
        if (!rule.object || *rule.object == rule.subject) {
          raise(ErrorCode::InvalidArgument,
                context + ": precedes requires distinct subject and object");
        }
        if (!declares_event_type(stream, *rule.object)) {
          raise(ErrorCode::InvalidArgument, context + ": rule references undeclared event type '" +
                                                *rule.object + "'");
        }
      }
      if (!declares_event_type(stream, rule.subject)) {
        raise(ErrorCode::InvalidArgument, context + ": rule references undeclared event type '" +
                                              rule.subject + "'");
      }
    }
  }
  for (const CohesionRule& rule : schema.cohesion_rules) {
    const StreamSchema* when = schema.find_stream_schema(rule.when_stream_type);
    if (!when || !schema.find_stream_schema(rule.requires_stream_type)) {
      raise(ErrorCode::InvalidArgument, context + ": cohesion rule references undeclared stream type");
    }
    if (!declares_event_type(*when, rule.contains_event)) {
      raise(ErrorCode::InvalidArgument, context + ": cohesion rule references undeclared event type '" +
                                            rule.contains_event + "'");
    }
  }
}

}  // namespace

std::string serialize_store_schema(const StoreSchema& schema) {
  std::string out;
  Json header = Json::object();
  header["format"] = 1;
  header["kind"] = "store_schema";
  header["id"] = schema.schema_id;
  header["version"] = schema.schema_version;
  out += header.dump() + "\n";

  for (const StreamSchema& stream : schema.stream_schemas) {
    Json line = Json::object();
    line["kind"] = "stream_schema";
    line["stream_type"] = stream.stream_type;
    out += line.dump() + "\n";
    for (const EventSchema& event : stream.event_schemas) {
      Json e = Json::object();
      e["kind"] = "event_schema";
      e["stream_type"] = stream.stream_type;
      e["event_type"] = event.event_type;
      e["v"] = event.version;
      e["strict_content"] = event.strict_content;
      Json fields = Json::array();
      for (const FieldSpec& field : event.fields) fields.push_back(field_to_json(field));
      e["fields"] = std::move(fields);
      out += e.dump() + "\n";
    }
    for (const OrderingRule& rule : stream.occurrence_patterns) {
      Json r = Json::object();
      r["kind"] = "ordering_rule";
      r["stream_type"] = stream.stream_type;
      r["rule"] = rule_kind_name(rule.kind);
      r["subject"] = rule.subject;
      if (rule.object) r["object"] = *rule.object;
      out += r.dump() + "\n";
    }
  }
  for (const CohesionRule& rule : schema.cohesion_rules) {
    Json r = Json::object();
    r["kind"] = "cohesion_rule";
    r["when_stream_type"] = rule.when_stream_type;
    r["contains_event"] = rule.contains_event;
    r["requires_stream_type"] = rule.requires_stream_type;
    out += r.dump() + "\n";
  }
  return out;
}

StoreSchema parse_store_schema(const std::string& text, const std::string& context) {
  StoreSchema schema;
  bool header_seen = false;
  std::istringstream in(text);
  std::string line;
  std::uint64_t line_number = 0;

  auto stream_ref = [&](const Json& j) -> StreamSchema& {
    const std::string type = j.value("stream_type", std::string());
    for (StreamSchema& s : schema.stream_schemas) {
      if (s.stream_type == type) return s;
    }
    raise(ErrorCode::InvalidArgument, context + " line " + std::to_string(line_number) +
                                          ": unknown stream_type '" + type + "'");
  };

  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      raise(ErrorCode::MalformedRecord,
            context + " line " + std::to_string(line_number) + " is not a JSON object");
    }
    const std::string kind = j.value("kind", std::string());
    if (!header_seen) {
      if (kind != "store_schema") {
        raise(ErrorCode::MalformedRecord, context + ": first line must be the store_schema header");
      }
      if (j.value("format", std::uint64_t(0)) != 1) {
        raise(ErrorCode::UnknownFormatVersion, context + ": unsupported schema format version");
      }
      schema.schema_id = j.value("id", std::string("schema"));
      schema.schema_version = j.value("version", std::uint64_t(1));
      header_seen = true;
      continue;
    }
    if (kind == "stream_schema") {
      StreamSchema s;
      s.stream_type = j.value("stream_type", std::string());
      schema.stream_schemas.push_back(std::move(s));
    } else if (kind == "event_schema") {
      StreamSchema& target = stream_ref(j);
      EventSchema e;
      e.event_type = j.value("event_type", std::string());
      e.version = j.value("v", std::uint64_t(1));
      e.strict_content = j.value("strict_content", false);
      for (const Json& f : j.value("fields", Json::array())) {
        e.fields.push_back(field_from_json(f, context));
      }
      target.event_schemas.push_back(std::move(e));
    } else if (kind == "ordering_rule") {
      StreamSchema& target = stream_ref(j);
      OrderingRule rule;
      const auto rk = rule_kind_from_name(j.value("rule", std::string()));
      if (!rk) {
        raise(ErrorCode::InvalidArgument,
              context + " line " + std::to_string(line_number) + ": unknown rule kind");
      }
      rule.kind = *rk;
      rule.subject = j.value("subject", std::string());
      if (j.contains("object") && j["object"].is_string()) {
        rule.object = j["object"].get<std::string>();
      }
      target.occurrence_patterns.push_back(std::move(rule));
    } else if (kind == "cohesion_rule") {
      CohesionRule rule;
      rule.when_stream_type = j.value("when_stream_type", std::string());
      rule.contains_event = j.value("contains_event", std::string());
      rule.requires_stream_type = j.value("requires_stream_type", std::string());
      schema.cohesion_rules.push_back(std::move(rule));
    } else {
      raise(ErrorCode::MalformedRecord, context + " line " + std::to_string(line_number) +
                                            ": unknown entity kind '" + kind + "'");
    }
  }
  if (!header_seen) {
    raise(ErrorCode::MalformedRecord, context + ": empty schema document");
  }
  validate_store_schema(schema, context);
  return schema;
}

StoreSchema load_store_schema(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open schema file " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_store_schema(std::move(buf).str(), file.filename().string());
}

void save_store_schema(const StoreSchema& schema, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write schema file " + file.string());
  out << serialize_store_schema(schema);
  if (!out.flush()) raise(ErrorCode::IoError, "failed writing schema file " + file.string());
}

}  // namespace evstore::schema
