#include "toolforge/toolgraph.hpp"

#include <algorithm>
#include <functional>

namespace toolforge::toolgraph {

std::string edge_type_wire(EdgeType t) {
    switch (t) {
        case EdgeType::state_dependency: return "state dependency";
        case EdgeType::information_flow: return "information flow";
        case EdgeType::storyline_flow: return "storyline flow";
    }
    return "state dependency";
}

EdgeType edge_type_from_wire(const std::string& s) {
    if (s == "state dependency" || s == "state_dependency") return EdgeType::state_dependency;
    if (s == "information flow" || s == "information_flow") return EdgeType::information_flow;
    if (s == "storyline flow" || s == "storyline_flow") return EdgeType::storyline_flow;
    throw Error("BadEdgeType", s);
}

bool ToolGraph::has_node(const std::string& n) const {
    return std::binary_search(nodes.begin(), nodes.end(), n);
}

bool ToolGraph::has_edge(const std::string& s, const std::string& t) const {
    for (const auto& e : edges)
        if (e.source == s && e.target == t) return true;
    return false;
}

std::vector<std::string> ToolGraph::successors(const std::string& n) const {
    std::vector<std::string> out;
    for (const auto& e : edges)
        if (e.source == n && !std::count(out.begin(), out.end(), e.target))
            out.push_back(e.target);
    std::sort(out.begin(), out.end());
    return out;
}

std::map<std::string, size_t> ToolGraph::in_degrees() const {
    std::map<std::string, size_t> deg;
    for (const auto& n : nodes) deg[n] = 0;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& e : edges)
        if (seen.insert({e.source, e.target}).second) ++deg[e.target];
    return deg;
}

std::vector<std::string> ToolGraph::sources() const {
    std::vector<std::string> out;
    for (const auto& [n, d] : in_degrees())
        if (d == 0) out.push_back(n);
    return out;
}

bool ToolGraph::has_path(const std::string& s, const std::string& t) const {
    if (s == t) return false;
    std::set<std::string> visited;
    std::vector<std::string> stack{s};
    while (!stack.empty()) {
        std::string cur = stack.back();
        stack.pop_back();
        if (!visited.insert(cur).second) continue;
        for (const auto& next : successors(cur)) {
            if (next == t) return true;
            stack.push_back(next);
        }
    }
    return false;
}

Json ToolGraph::to_json() const {
    Json nodes_j = Json::array();
    for (const auto& n : nodes) nodes_j.push_back({{"id", n}});
    Json links = Json::array();
    for (const auto& e : edges)
        links.push_back(
            {{"source", e.source}, {"target", e.target}, {"type", edge_type_wire(e.type)}});
    return {{"directed", true}, {"multigraph", false}, {"nodes", nodes_j}, {"links", links}};
}

ToolGraph ToolGraph::from_json(const Json& j) {
    ToolGraph g;
    for (const auto& n : j.at("nodes")) g.nodes.push_back(n.at("id").get<std::string>());
    std::sort(g.nodes.begin(), g.nodes.end());
    g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
    for (const auto& l : j.at("links"))
        g.edges.push_back({l.at("source"), l.at("target"),
                           edge_type_from_wire(l.value("type", "state dependency"))});
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    return g;
}

std::string trajectory_hash(const std::vector<std::string>& tools) {
    return hash_json(Json(tools));
}

Trajectory Trajectory::of(std::vector<std::string> tools) {
    Trajectory t;
    t.hash = trajectory_hash(tools);
    t.tools = std::move(tools);
    return t;
}

Json Trajectory::to_json() const { return {{"tools", tools}, {"hash", hash}}; }

Trajectory Trajectory::from_json(const Json& j) {
    Trajectory t;
    t.tools = j.at("tools").get<std::vector<std::string>>();
    t.hash = j.value("hash", trajectory_hash(t.tools));
    return t;
}

namespace {

// would adding s->t close a cycle? true iff t already reaches s
bool creates_cycle(const ToolGraph& g, const std::string& s, const std::string& t) {
    return s == t || g.has_path(t, s);
}

bool mentions_session_auth(const policy::Expr& e) {
    switch (e.kind) {
        case policy::ExprKind::field:
            return e.path.size() >= 2 && e.path[0] == "session";
        case policy::ExprKind::exists: {
            for (const auto& w : e.where)
                if (mentions_session_auth(*w.value)) return true;
            return false;
        }
        default:
            for (const auto& c : e.children)
                if (mentions_session_auth(*c)) return true;
            return false;
    }
}

// fields a tool's payload can expose, lowercased
std::set<std::string> output_fields(const policy::ToolContract& c,
                                    const datastore::DatabaseSummary* summary) {
    std::set<std::string> out;
    auto add_table_columns = [&](const std::string& table) {
        if (!summary) return;
        auto it = summary->tables.find(table);
        if (it == summary->tables.end()) return;
        for (const auto& [col, _] : it->second) out.insert(to_lower(col));
    };
    if (c.output.kind == policy::OutputSpec::Kind::row ||
        c.output.kind == policy::OutputSpec::Kind::rows)
        add_table_columns(c.output.table);
    for (const auto& m : c.side_effects) {
        if (m.kind != policy::Mutation::Kind::insert) continue;
        add_table_columns(m.table);
        for (const auto& a : m.assignments) out.insert(to_lower(a.column));
    }
    return out;
}

}  // namespace

ToolGraph infer_dependencies(const policy::PolicyDoc& contracts,
                             const std::vector<blueprint::ToolSchemaDoc>& tool_docs,
                             const Json& graph_hint, const std::string& auth_tool,
                             const datastore::DatabaseSummary* summary) {
    ToolGraph g;
    for (const auto& d : tool_docs) g.nodes.push_back(d.name);
    std::sort(g.nodes.begin(), g.nodes.end());
    g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
    if (g.nodes.empty()) throw UnsatisfiableTopology("no tools to build a graph from");

    for (const auto& d : tool_docs)
        if (!contracts.contracts.count(d.name))
            throw Error("MissingContract", "no contract for tool " + d.name);

    std::string auth = auth_tool;
    if (auth.empty()) {
        for (const auto& n : g.nodes)
            if (n.find("authorize") != std::string::npos) {
                auth = n;
                break;
            }
    }
    if (auth.empty() || !g.has_node(auth))
        throw UnsatisfiableTopology("no authorize-style entry tool found");

    auto add_edge = [&](const std::string& s, const std::string& t, EdgeType type) {
        if (t == auth) return false;  // the source keeps in-degree 0
        if (s == t || g.has_edge(s, t)) return false;
        if (creates_cycle(g, s, t)) return false;
        g.edges.push_back({s, t, type});
        std::sort(g.edges.begin(), g.edges.end());
        return true;
    };

    // state edges: the auth gate guards every tool whose contract (or the
    // global rules that apply to it) touches session state
    bool global_session = false;
    for (const auto& r : contracts.global_rules)
        if (mentions_session_auth(*r)) global_session = true;
    for (const auto& n : g.nodes) {
        if (n == auth) continue;
        bool needs_auth = global_session;
        if (!needs_auth) {
            const auto& c = contracts.contracts.at(n);
            for (const auto& p : c.preconditions)
                if (mentions_session_auth(*p)) needs_auth = true;
        }
        if (needs_auth) add_edge(auth, n, EdgeType::state_dependency);
    }

    // information flow: output field name matches a required parameter
    std::map<std::string, std::set<std::string>> fields;
    std::map<std::string, std::set<std::string>> params;
    for (const auto& d : tool_docs) {
        fields[d.name] = output_fields(contracts.contracts.at(d.name), summary);
        for (const auto& p : d.required) params[d.name].insert(to_lower(p));
    }
    for (const auto& a : g.nodes) {
        for (const auto& b : g.nodes) {
            if (a == b || b == auth) continue;
            bool flow = false;
            for (const auto& f : fields[a])
                if (params[b].count(f)) {
                    flow = true;
                    break;
                }
            if (flow) add_edge(a, b, EdgeType::information_flow);
        }
    }

    // hint edges (provider reasoning), same skip rules
    if (graph_hint.is_object() && graph_hint.contains("links")) {
        for (const auto& l : graph_hint["links"]) {
            std::string s = l.value("source", ""), t = l.value("target", "");
            if (!g.has_node(s) || !g.has_node(t)) continue;
            EdgeType type = EdgeType::storyline_flow;
            try {
                type = edge_type_from_wire(l.value("type", "storyline flow"));
            } catch (const Error&) {
            }
            add_edge(s, t, type);
        }
    }

    // storyline fallback: connect anything still unreachable from the source
    auto reachable = [&] {
        std::set<std::string> seen{auth};
        std::vector<std::string> stack{auth};
        while (!stack.empty()) {
            auto cur = stack.back();
            stack.pop_back();
            for (const auto& nxt : g.successors(cur))
                if (seen.insert(nxt).second) stack.push_back(nxt);
        }
        return seen;
    };
    auto seen = reachable();
    for (const auto& n : g.nodes)
        if (!seen.count(n)) add_edge(auth, n, EdgeType::storyline_flow);

    auto violations = validate_tool_graph(g);
    if (!violations.empty())
        throw UnsatisfiableTopology("graph invalid after inference: " +
                                    violations_to_json(violations).dump());
    return g;
}

std::vector<Violation> validate_tool_graph(const ToolGraph& g) {
    std::vector<Violation> out;
    auto sources = g.sources();
    if (sources.empty()) {
        out.push_back({"NoSource", "no node with in-degree 0", Json::object()});
    } else if (sources.size() > 1) {
        out.push_back(
            {"MultipleSources", std::to_string(sources.size()) + " nodes with in-degree 0",
             {{"sources", sources}}});
    }

    // cycle detection with an explicit path for the report
    std::map<std::string, int> color;  // 0 white, 1 gray, 2 black
    std::vector<std::string> path;
    std::vector<std::string> cycle;
    std::function<bool(const std::string&)> dfs = [&](const std::string& n) {
        color[n] = 1;
        path.push_back(n);
        for (const auto& next : g.successors(n)) {
            if (color[next] == 1) {
                auto it = std::find(path.begin(), path.end(), next);
                cycle.assign(it, path.end());
                cycle.push_back(next);
                return true;
            }
            if (color[next] == 0 && dfs(next)) return true;
        }
        path.pop_back();
        color[n] = 2;
        return false;
    };
    for (const auto& n : g.nodes) {
        if (color[n] == 0 && dfs(n)) {
            out.push_back({"CycleDetected", "cycle found", {{"path", cycle}}});
            break;
        }
    }

    // forward reachability from the union of sources
    if (!sources.empty()) {
        std::set<std::string> seen(sources.begin(), sources.end());
        std::vector<std::string> stack(sources.begin(), sources.end());
        while (!stack.empty()) {
            auto cur = stack.back();
            stack.pop_back();
            for (const auto& next : g.successors(cur))
                if (seen.insert(next).second) stack.push_back(next);
        }
        for (const auto& n : g.nodes)
            if (!seen.count(n))
                out.push_back({"UnreachableNode", n + " unreachable from source", {{"node", n}}});
    }
    return out;
}

std::vector<Trajectory> enumerate_trajectories(const ToolGraph& g, size_t l_min, size_t l_max,
                                               size_t budget) {
    std::vector<Trajectory> out;
    auto sources = g.sources();
    if (sources.size() != 1 || l_min > l_max || l_min == 0) {
        if (l_min == 0) throw Error("BadConfig", "l_min must be positive");
        if (sources.size() != 1) throw Error("BadGraph", "enumeration needs a single source");
    }
    if (l_min > l_max) return out;
    const std::string& source = sources[0];

    std::vector<std::string> path;
    std::set<std::string> on_path;
    std::function<void(const std::string&)> dfs = [&](const std::string& node) {
        path.push_back(node);
        on_path.insert(node);
        size_t len = path.size();
        auto succ = g.successors(node);
        bool is_sink = succ.empty();
        if (len >= l_min && len <= l_max && (is_sink || len == l_max)) {
            if (out.size() >= budget)
                throw BudgetExceeded("trajectory budget " + std::to_string(budget) +
                                     " exceeded; partial count " + std::to_string(out.size()));
            out.push_back(Trajectory::of(path));
        }
        if (len < l_max) {
            for (const auto& next : succ) {
                if (on_path.count(next)) continue;
                dfs(next);
            }
        }
        on_path.erase(node);
        path.pop_back();
    };
    dfs(source);
    return out;
}

}  // namespace toolforge::toolgraph
