#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evstore/event.hpp"

namespace evstore {
class EventStore;
}

namespace evstore::schema {

enum class FieldKind { String, Integer, Decimal, Boolean, Timestamp, List, Map };

const char* field_kind_name(FieldKind kind);
std::optional<FieldKind> field_kind_from_name(std::string_view name);

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::String;
  bool required = false;
  std::optional<Json> default_value;
  // Element kind for List, value kind for Map; unset means any JSON value.
  std::optional<FieldKind> element;

  friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

struct EventSchema {
  std::string event_type;
  std::uint64_t version = 1;
  std::vector<FieldSpec> fields;
  // Open content by default: undeclared payload fields are tolerated.
  bool strict_content = false;

  const FieldSpec* find_field(const std::string& name) const;

  friend bool operator==(const EventSchema&, const EventSchema&) = default;
};

enum class RuleKind { Precedes, AtMostOnce, Initial, Terminal };

const char* rule_kind_name(RuleKind kind);
std::optional<RuleKind> rule_kind_from_name(std::string_view name);

// Occurrence patterns over a stream:
//   precedes(a, b)   every occurrence of b has an earlier occurrence of a
//   at_most_once(t)  t occurs at most once
//   initial(t)       a non-empty stream starts with an event of type t
//   terminal(t)      no event follows an occurrence of t
struct OrderingRule {
  RuleKind kind = RuleKind::AtMostOnce;
  std::string subject;
  std::optional<std::string> object;

  std::string describe() const;

  friend bool operator==(const OrderingRule&, const OrderingRule&) = default;
};

struct StreamSchema {
  std::string stream_type;
  std::vector<EventSchema> event_schemas;
  std::vector<OrderingRule> occurrence_patterns;

  const EventSchema* find_event_schema(const std::string& event_type,
                                       std::uint64_t version) const;

  friend bool operator==(const StreamSchema&, const StreamSchema&) = default;
};

// When a stream of type `when_stream_type` contains an event of type
// `contains_event`, a stream of type `requires_stream_type` must exist.
struct CohesionRule {
  std::string when_stream_type;
  std::string contains_event;
  std::string requires_stream_type;

  friend bool operator==(const CohesionRule&, const CohesionRule&) = default;
};

struct StoreSchema {
  std::string schema_id;
  std::uint64_t schema_version = 1;
  std::vector<StreamSchema> stream_schemas;
  std::vector<CohesionRule> cohesion_rules;

  const StreamSchema* find_stream_schema(const std::string& stream_type) const;
};

struct Violation {
  std::string stream_id;   // empty for event-level checks
  std::uint64_t sequence = 0;  // 0 when not tied to a position
  std::string rule;        // e.g. "required-field", "precedes", "cohesion"
  std::string message;
};

struct ConformanceResult {
  std::vector<Violation> violations;
  bool conforms() const { return violations.empty(); }
};

// Violations are data, not errors: all three checks always return.
ConformanceResult conforms_event(const Event& e, const EventSchema& schema);
ConformanceResult conforms_stream(const std::string& stream_id,
                                  const std::vector<SequencedEvent>& entries,
                                  const StreamSchema& schema);
// Requires every stream to carry a stream_type tag (UnassignedStreamType).
ConformanceResult conforms_store(const EventStore& store, const StoreSchema& schema);

// True iff every old stream schema is contained in a new stream schema with
// the same stream_type: event schemas carried over unchanged (exact
// type+version match), ordering rules all present, and anything added
// vacuously satisfied by streams conforming to the old schema. Under this
// containment, schema_superset(old, new) guarantees that every store
// conforming to `old` conforms to `new` without transformation.
bool schema_superset(const StoreSchema& older, const StoreSchema& newer);
// Reason for the first containment failure, or nullopt when superset holds.
std::optional<std::string> schema_superset_gap(const StoreSchema& older,
                                               const StoreSchema& newer);

bool value_matches_kind(const Json& value, FieldKind kind,
                        const std::optional<FieldKind>& element = {});

// Schema documents: one StoreSchema per file, single-line JSON per entity.
StoreSchema load_store_schema(const std::filesystem::path& file);
StoreSchema parse_store_schema(const std::string& text, const std::string& context);
void save_store_schema(const StoreSchema& schema, const std::filesystem::path& file);
std::string serialize_store_schema(const StoreSchema& schema);

}  // namespace evstore::schema
