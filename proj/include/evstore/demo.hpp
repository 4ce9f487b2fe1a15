#pragma once

#include "evstore/cqrs.hpp"

namespace evstore::demo {

// Generic recorder domain used by the CLI's rebuild/simulate subcommands and
// by the harness tests.
//
//   commands  record         payload {"type","v","payload","meta"} appended as-is
//             record_unique  same, rejected when the stream already holds that type
//   projectors/queries
//             count          pre-built counter over all streams
//             count_sync     synchronous counter
//             count_demand   on-demand counter
//
// Counter state: {"events": n, "by_type": {type: n}}.
void register_demo_system(cqrs::System& system);

}  // namespace evstore::demo
