#include "toolforge/wire.hpp"

#include <istream>
#include <ostream>

namespace toolforge::wire {

Json handle_request(runtime::Runtime& rt, const Json& request) {
    std::string op = request.value("op", "");
    if (op == "create_session") return {{"ok", true}, {"session_id", rt.create_session()}};
    if (op == "invoke") {
        auto result = rt.invoke(request.value("session_id", ""), request.value("tool_name", ""),
                                request.value("args", Json::object()));
        return {{"ok", true}, {"result", result.to_json()}};
    }
    if (op == "tools") return {{"ok", true}, {"tools", rt.tool_names()}};
    return {{"ok", false}, {"error", "unknown op: " + op}};
}

void serve(runtime::Runtime& rt, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json response;
        try {
            response = handle_request(rt, Json::parse(line));
        } catch (const std::exception& e) {
            response = {{"ok", false}, {"error", e.what()}};
        }
        out << response.dump() << "\n";
        out.flush();
    }
}

}  // namespace toolforge::wire
