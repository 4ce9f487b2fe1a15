#include "evstore/event.hpp"

#include "evstore/errors.hpp"

namespace evstore {
namespace {

bool is_name(const std::string& name, bool allow_dash) {
  if (name.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(name[0]))) return false;
  for (char c : name) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || c == '_' || (allow_dash && c == '-')) continue;
    return false;
  }
  return true;
}

}  // namespace

bool is_valid_event_type(const std::string& name) { return is_name(name, false); }

// Stream ids also serve as log file names; dashes are allowed ("license-42").
bool is_valid_stream_id(const std::string& name) { return is_name(name, true); }

void validate_event(const Event& e) {
  if (!is_valid_event_type(e.type)) {
    raise(ErrorCode::InvalidArgument, "invalid event type '" + e.type + "'");
  }
  if (e.version < 1) {
    raise(ErrorCode::InvalidArgument, "schema_version must be >= 1");
  }
  if (!e.payload.is_object()) {
    raise(ErrorCode::InvalidArgument, "event payload must be a JSON object");
  }
  if (!e.meta.is_object()) {
    raise(ErrorCode::InvalidArgument, "event metadata must be a JSON object");
  }
}

}  // namespace evstore
