#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace evstore {

// Payloads and metadata are JSON objects whose keys keep insertion order;
// the on-disk record format serializes them in exactly that order.
using Json = nlohmann::ordered_json;

// One state change, described in domain terms. `meta` is not part of the
// domain payload and is excluded from schema conformance checking; by
// convention it may carry "ts" (UTC milliseconds) and "causation" ids.
struct Event {
  std::string type;
  std::uint64_t version = 1;
  Json payload = Json::object();
  Json meta = Json::object();

  friend bool operator==(const Event& a, const Event& b) {
    return a.type == b.type && a.version == b.version && a.payload == b.payload &&
           a.meta == b.meta;
  }
};

struct SequencedEvent {
  Event event;
  std::uint64_t sequence = 0;

  friend bool operator==(const SequencedEvent& a, const SequencedEvent& b) {
    return a.sequence == b.sequence && a.event == b.event;
  }
};

bool is_valid_event_type(const std::string& name);
bool is_valid_stream_id(const std::string& name);

// Throws InvalidArgument unless type matches [A-Za-z][A-Za-z0-9_]*,
// version >= 1 and payload/meta are JSON objects.
void validate_event(const Event& e);

}  // namespace evstore
