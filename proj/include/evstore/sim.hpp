#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evstore/cqrs.hpp"
#include "evstore/event.hpp"

namespace evstore::sim {

// One step of a deterministic schedule. Notification delivery is an explicit
// step, not wall-clock timing, so inconsistency windows are exact.
struct ScriptStep {
  enum class Kind { Command, Query, Deliver, Quiesce };
  Kind kind = Kind::Quiesce;
  cqrs::Command command;   // Command
  std::string query_name;  // Query
  Json query_params = Json::object();
  std::string projector;        // Deliver
  std::uint64_t count = 0;      // Deliver: events to deliver
};

std::vector<ScriptStep> parse_script(const std::string& text, const std::string& context);
std::vector<ScriptStep> load_script(const std::filesystem::path& file);

struct Trace {
  std::vector<Json> entries;
  std::string to_text() const;  // one JSON line per entry

  friend bool operator==(const Trace& a, const Trace& b) { return a.entries == b.entries; }
};

// Runs a script against a system. Identical (seed, script) pairs yield
// byte-identical traces; the seed only permutes the order in which quiesce
// drains independent projectors.
class Simulation {
 public:
  Simulation(cqrs::System& system, std::uint64_t seed);

  Trace run_script(const std::vector<ScriptStep>& script);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t steps_run() const { return step_counter_; }

 private:
  void check_targets(const std::vector<ScriptStep>& script) const;

  cqrs::System& system_;
  std::uint64_t seed_;
  std::uint64_t step_counter_ = 0;
};

}  // namespace evstore::sim
