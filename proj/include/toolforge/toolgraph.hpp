#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "toolforge/blueprint.hpp"
#include "toolforge/common.hpp"
#include "toolforge/datastore.hpp"
#include "toolforge/policy.hpp"

namespace toolforge::toolgraph {

TOOLFORGE_ERROR(UnsatisfiableTopology);
TOOLFORGE_ERROR(BudgetExceeded);

enum class EdgeType { state_dependency, information_flow, storyline_flow };

// Wire form uses spaces: "state dependency" / "information flow" / "storyline flow".
std::string edge_type_wire(EdgeType t);
EdgeType edge_type_from_wire(const std::string& s);

struct ToolEdge {
    std::string source;
    std::string target;
    EdgeType type = EdgeType::state_dependency;

    bool operator<(const ToolEdge& o) const {
        return std::tie(source, target, type) < std::tie(o.source, o.target, o.type);
    }
    bool operator==(const ToolEdge& o) const {
        return source == o.source && target == o.target && type == o.type;
    }
};

struct ToolGraph {
    std::vector<std::string> nodes;  // sorted, unique
    std::vector<ToolEdge> edges;     // sorted, unique

    bool has_node(const std::string& n) const;
    bool has_edge(const std::string& s, const std::string& t) const;
    std::vector<std::string> successors(const std::string& n) const;  // sorted
    std::map<std::string, size_t> in_degrees() const;
    std::vector<std::string> sources() const;  // in-degree-0 nodes

    // True when there is a directed path s ~> t (used by the action evaluator).
    bool has_path(const std::string& s, const std::string& t) const;

    Json to_json() const;  // node-link: directed/multigraph/nodes/links
    static ToolGraph from_json(const Json& j);
};

struct Trajectory {
    std::vector<std::string> tools;
    std::string hash;

    static Trajectory of(std::vector<std::string> tools);
    Json to_json() const;
    static Trajectory from_json(const Json& j);
};

std::string trajectory_hash(const std::vector<std::string>& tools);

// Step 9: deterministic dependency inference. State edges flow out of the
// auth gate; information edges connect output fields to same-named required
// params; storyline edges are added (from the hint first, then from the
// source) only where connectivity cannot otherwise be satisfied. Candidate
// edges that would point at the source or close a cycle are skipped.
ToolGraph infer_dependencies(const policy::PolicyDoc& contracts,
                             const std::vector<blueprint::ToolSchemaDoc>& tool_docs,
                             const Json& graph_hint = Json(),
                             const std::string& auth_tool = "",
                             const datastore::DatabaseSummary* summary = nullptr);

std::vector<Violation> validate_tool_graph(const ToolGraph& g);

// Step 14 phase 1: all simple paths from the source with length in
// [l_min, l_max] that end at a sink or have length exactly l_max, in
// lexicographic order of the tool sequence.
std::vector<Trajectory> enumerate_trajectories(const ToolGraph& g, size_t l_min, size_t l_max,
                                               size_t budget = 100000);

}  // namespace toolforge::toolgraph
