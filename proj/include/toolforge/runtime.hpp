#pragma once

#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "toolforge/blueprint.hpp"
#include "toolforge/common.hpp"
#include "toolforge/datastore.hpp"
#include "toolforge/policy.hpp"

namespace toolforge::runtime {

enum class Status { ok, needs_confirmation, rejected, error };

std::string status_name(Status s);

struct InvocationResult {
    Status status = Status::error;
    Json payload;  // wire-serializable tree
    std::string reason;

    Json to_json() const;
    static InvocationResult from_json(const Json& j);
};

// One service mounted into the runtime. In a fused context `prefix` is
// non-empty: tools answer to "<prefix>_<tool>" and relationship tables are
// resolved through the "<prefix>_<T>" alias, while the contracts themselves
// stay exactly as authored.
struct DomainSpec {
    std::string domain;
    std::string prefix;  // empty for single-domain runtimes
    policy::PolicyDoc policy;
    std::string core_entity;
    std::string core_pk;

    struct ToolMeta {
        bool mutating = false;
        bool requires_confirmation = false;
        std::string role;
        std::vector<std::string> params;
        std::set<std::string> free_text_params;
    };
    std::map<std::string, ToolMeta> tools;  // bare tool names

    static DomainSpec from_blueprint(const blueprint::Blueprint& bp,
                                     const policy::PolicyDoc& policy,
                                     const std::string& prefix = "");
};

// Construction-time contract/blueprint consistency findings (mutating tools
// need effects, non-mutating must have none, every tool needs a contract).
std::vector<Violation> lint_domain(const DomainSpec& spec);

class Runtime {
public:
    Runtime(datastore::Database base, std::vector<DomainSpec> domains,
            std::string simulation_time, bool tick_per_turn = false);

    std::string create_session();

    // Unified router. Never throws: every outcome is a typed result.
    InvocationResult invoke(const std::string& session_id, const std::string& tool_name,
                            Json args);

    // Convenience wrapper over the domain's authorize-role tool.
    InvocationResult authorize(const std::string& session_id, const Json& core_id,
                               const std::string& domain = "");

    std::vector<std::string> tool_names() const;  // qualified
    const datastore::Database& base() const { return base_; }
    const std::vector<DomainSpec>& domains() const { return domains_; }

    // Content hash of a session's private database.
    std::string session_db_hash(const std::string& session_id) const;
    datastore::Snapshot session_snapshot(const std::string& session_id) const;
    bool session_authenticated(const std::string& session_id, const std::string& domain) const;

private:
    struct Session {
        datastore::Database db;
        std::map<std::string, Json> auth;  // domain -> {authenticated, authorized_core_id}
        std::map<std::string, Json> pending_confirmations;
        int64_t invocations = 0;
        std::mutex mu;
    };

    struct ToolEntry {
        size_t domain_index;
        std::string bare_name;
        const policy::ToolContract* contract;
        const DomainSpec::ToolMeta* meta;
    };

    InvocationResult run_tool(Session& s, const ToolEntry& entry, Json args);
    policy::EvalContext make_context(Session& s, const DomainSpec& spec, const Json& args) const;

    datastore::Database base_;
    std::vector<DomainSpec> domains_;
    std::string simulation_time_;
    bool tick_per_turn_ = false;
    std::map<std::string, ToolEntry> router_;
    std::map<std::string, std::unique_ptr<Session>> sessions_;
    mutable std::mutex sessions_mu_;
    size_t next_session_ = 0;
};

std::string confirmation_key(const std::string& tool, const Json& args);

// Preview text: "<kind> <table> where <assignments>".
std::string preview_text(const policy::Mutation& m, const policy::EvalContext& ctx);

}  // namespace toolforge::runtime
