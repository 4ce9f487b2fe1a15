#include "evstore/sim.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "evstore/errors.hpp"

namespace evstore::sim {

std::vector<ScriptStep> parse_script(const std::string& text, const std::string& context) {
  std::vector<ScriptStep> steps;
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
    const std::string op = j.value("op", std::string());
    ScriptStep step;
    if (op == "command") {
      step.kind = ScriptStep::Kind::Command;
      step.command.command_type = j.value("type", std::string());
      step.command.target_stream = j.value("stream", std::string());
      if (j.contains("expect")) {
        step.command.expected_sequence = j["expect"].get<std::uint64_t>();
      }
      step.command.payload = j.value("payload", Json::object());
    } else if (op == "query") {
      step.kind = ScriptStep::Kind::Query;
      step.query_name = j.value("name", std::string());
      step.query_params = j.value("params", Json::object());
    } else if (op == "deliver") {
      step.kind = ScriptStep::Kind::Deliver;
      step.projector = j.value("projector", std::string());
      step.count = j.value("k", std::uint64_t(1));
    } else if (op == "quiesce") {
      step.kind = ScriptStep::Kind::Quiesce;
    } else {
      raise(ErrorCode::MalformedRecord, context + " line " + std::to_string(line_number) +
                                            ": unknown op '" + op + "'");
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

std::vector<ScriptStep> load_script(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open script file " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_script(std::move(buf).str(), file.filename().string());
}

std::string Trace::to_text() const {
  std::string out;
  for (const Json& entry : entries) {
    out += entry.dump() + "\n";
  }
  return out;
}

Simulation::Simulation(cqrs::System& system, std::uint64_t seed) : system_(system), seed_(seed) {}

void Simulation::check_targets(const std::vector<ScriptStep>& script) const {
  for (const ScriptStep& step : script) {
    switch (step.kind) {
      case ScriptStep::Kind::Command:
        if (!system_.has_command_type(step.command.command_type)) {
          raise(ErrorCode::UnknownScriptTarget,
                "script references unregistered command type '" + step.command.command_type + "'");
        }
        break;
      case ScriptStep::Kind::Query:
        if (!system_.has_query(step.query_name)) {
          raise(ErrorCode::UnknownScriptTarget,
                "script references unregistered query '" + step.query_name + "'");
        }
        break;
      case ScriptStep::Kind::Deliver:
        if (!system_.has_projector(step.projector)) {
          raise(ErrorCode::UnknownScriptTarget,
                "script references unregistered projector '" + step.projector + "'");
        }
        break;
      case ScriptStep::Kind::Quiesce:
        break;
    }
  }
}

Trace Simulation::run_script(const std::vector<ScriptStep>& script) {
  check_targets(script);
  Trace trace;

  for (const ScriptStep& step : script) {
    const std::uint64_t step_index = step_counter_++;
    Json entry = Json::object();
    entry["step"] = step_index;

    switch (step.kind) {
      case ScriptStep::Kind::Command: {
        entry["op"] = "command";
        entry["type"] = step.command.command_type;
        entry["stream"] = step.command.target_stream;
        const cqrs::CommandResult result = system_.handle_command(step.command);
        switch (result.status) {
          case cqrs::CommandResult::Status::Accepted: {
            entry["result"] = "accepted";
            Json seqs = Json::array();
            for (const SequencedEvent& e : result.appended) seqs.push_back(e.sequence);
            entry["seqs"] = std::move(seqs);
            break;
          }
          case cqrs::CommandResult::Status::Rejected:
            entry["result"] = "rejected";
            entry["reason"] = result.rejection->reason;
            break;
          case cqrs::CommandResult::Status::Conflict:
            entry["result"] = "conflict";
            entry["detail"] = result.conflict_message;
            break;
        }
        break;
      }
      case ScriptStep::Kind::Query: {
        entry["op"] = "query";
        entry["name"] = step.query_name;
        try {
          const cqrs::QueryResult result = system_.handle_query(step.query_name, step.query_params);
          entry["mode"] = cqrs::projection_mode_name(result.mode);
          entry["value"] = result.value;
          Json checkpoint = Json::object();
          for (const auto& [stream, seq] : result.checkpoint) checkpoint[stream] = seq;
          entry["checkpoint"] = std::move(checkpoint);
          entry["lag"] = result.lag;
        } catch (const Error& e) {
          entry["error"] = error_code_name(e.code());
        }
        break;
      }
      case ScriptStep::Kind::Deliver: {
        entry["op"] = "deliver";
        entry["projector"] = step.projector;
        entry["requested"] = step.count;
        try {
          const std::uint64_t delivered = system_.deliver(step.projector, step.count);
          entry["delivered"] = delivered;
          entry["window"] = system_.window(step.projector);
        } catch (const Error& e) {
          entry["error"] = error_code_name(e.code());
        }
        break;
      }
      case ScriptStep::Kind::Quiesce: {
        entry["op"] = "quiesce";
        // The scheduler is free to drain independent projectors in any
        // order; the seed pins one down.
        std::vector<std::string> names;
        for (const auto& [name, mode] : system_.projector_names()) {
          if (mode != cqrs::ProjectionMode::OnDemand) names.push_back(name);
        }
        std::mt19937_64 rng(seed_ ^ (0x9e3779b97f4a7c15ULL + step_index));
        std::shuffle(names.begin(), names.end(), rng);
        Json delivered = Json::object();
        std::uint64_t total = 0;
        for (const std::string& name : names) {
          try {
            const std::uint64_t n = system_.deliver(name, UINT64_MAX);
            delivered[name] = n;
            total += n;
          } catch (const Error& e) {
            delivered[name] = error_code_name(e.code());
          }
        }
        entry["order"] = names;
        entry["delivered"] = std::move(delivered);
        entry["total"] = total;
        break;
      }
    }
    trace.entries.push_back(std::move(entry));
  }
  return trace;
}

}  // namespace evstore::sim
