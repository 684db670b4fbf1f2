#pragma once

#include <iosfwd>

#include "toolforge/runtime.hpp"

namespace toolforge::wire {

// Newline-delimited JSON adapter for out-of-process agents.
// Requests: {"op":"create_session"}
//           {"op":"invoke","session_id":"...","tool_name":"...","args":{...}}
//           {"op":"tools"}
// Every response carries {"ok": bool, ...}; malformed input never kills the loop.
Json handle_request(runtime::Runtime& rt, const Json& request);

void serve(runtime::Runtime& rt, std::istream& in, std::ostream& out);

}  // namespace toolforge::wire
