#include "evstore/demo.hpp"

#include "evstore/errors.hpp"

namespace evstore::demo {
namespace {

using cqrs::AcceptOutcome;
using cqrs::Command;
using cqrs::Rejection;

Json counter_fold(Json state, const std::string&, const SequencedEvent& entry) {
  state["events"] = state["events"].get<std::uint64_t>() + 1;
  Json& per_type = state["by_type"][entry.event.type];
  per_type = (per_type.is_null() ? 0 : per_type.get<std::uint64_t>()) + 1;
  return state;
}

Json counter_initial() {
  Json state = Json::object();
  state["events"] = 0;
  state["by_type"] = Json::object();
  return state;
}

AcceptOutcome record_accept(const Json& state, const Command& command) {
  if (!command.payload.contains("type") || !command.payload["type"].is_string()) {
    return Rejection{"bad_event", "command payload must carry an event 'type'"};
  }
  Event event;
  event.type = command.payload["type"].get<std::string>();
  event.version = command.payload.value("v", std::uint64_t(1));
  event.payload = command.payload.value("payload", Json::object());
  event.meta = command.payload.value("meta", Json::object());
  if (!is_valid_event_type(event.type)) {
    return Rejection{"bad_event", "invalid event type '" + event.type + "'"};
  }
  if (command.command_type == "record_unique" &&
      state["by_type"].contains(event.type)) {
    return Rejection{"duplicate", "stream already holds an event of type '" + event.type + "'"};
  }
  return std::vector<Event>{std::move(event)};
}

}  // namespace

void register_demo_system(cqrs::System& system) {
  cqrs::AggregateDefinition recorder;
  recorder.name = "recorder";
  recorder.handled_commands = {"record", "record_unique"};
  recorder.initial_state = counter_initial();
  recorder.fold = counter_fold;
  recorder.accept = record_accept;
  system.register_aggregate(std::move(recorder));

  const std::pair<const char*, cqrs::ProjectionMode> projectors[] = {
      {"count", cqrs::ProjectionMode::PreBuilt},
      {"count_sync", cqrs::ProjectionMode::Synchronous},
      {"count_demand", cqrs::ProjectionMode::OnDemand},
  };
  for (const auto& [name, mode] : projectors) {
    cqrs::ProjectorDefinition def;
    def.name = name;
    def.sources = cqrs::StreamSelector::all();
    def.initial_state = counter_initial();
    def.fold = counter_fold;
    def.mode = mode;
    system.register_projector(std::move(def));
    system.register_query(name, name);
  }
}

}  // namespace evstore::demo
