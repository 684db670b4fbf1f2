#include "toolforge/runtime.hpp"

#include <algorithm>
#include <regex>

namespace toolforge::runtime {

std::string status_name(Status s) {
    switch (s) {
        case Status::ok: return "ok";
        case Status::needs_confirmation: return "needs_confirmation";
        case Status::rejected: return "rejected";
        case Status::error: return "error";
    }
    return "error";
}

Json InvocationResult::to_json() const {
    return {{"status", status_name(status)}, {"payload", payload}, {"reason", reason}};
}

InvocationResult InvocationResult::from_json(const Json& j) {
    InvocationResult r;
    std::string s = j.at("status");
    r.status = s == "ok"                  ? Status::ok
               : s == "needs_confirmation" ? Status::needs_confirmation
               : s == "rejected"           ? Status::rejected
                                           : Status::error;
    r.payload = j.value("payload", Json());
    r.reason = j.value("reason", "");
    return r;
}

DomainSpec DomainSpec::from_blueprint(const blueprint::Blueprint& bp,
                                      const policy::PolicyDoc& policy,
                                      const std::string& prefix) {
    DomainSpec spec;
    spec.domain = bp.server_name;
    spec.prefix = prefix;
    spec.policy = policy;
    spec.core_entity = bp.core_entity;
    spec.core_pk = ontology::normalize_primary_key(bp.core_entity);
    for (const auto& f : bp.functions) {
        ToolMeta meta;
        meta.mutating = f.mutating;
        meta.requires_confirmation = f.requires_confirmation;
        meta.role = f.role;
        for (const auto& [p, pspec] : f.parameters) {
            meta.params.push_back(p);
            if (pspec.free_text) meta.free_text_params.insert(p);
        }
        spec.tools[f.name] = std::move(meta);
    }
    return spec;
}

std::vector<Violation> lint_domain(const DomainSpec& spec) {
    std::vector<Violation> out;
    for (const auto& [tool, meta] : spec.tools) {
        auto it = spec.policy.contracts.find(tool);
        if (it == spec.policy.contracts.end()) {
            out.push_back({"MissingContract", "no contract for tool " + tool, {{"tool", tool}}});
            continue;
        }
        const auto& c = it->second;
        if (meta.mutating && c.side_effects.empty())
            out.push_back({"MissingSideEffect", "mutating tool " + tool + " has no side effects",
                           {{"tool", tool}}});
        if (!meta.mutating && !c.side_effects.empty())
            out.push_back({"UnexpectedSideEffect",
                           "non-mutating tool " + tool + " declares side effects",
                           {{"tool", tool}}});
        if (c.permission_rules.empty() || c.permission_rules.back().condition != nullptr)
            out.push_back({"MissingDefaultRule",
                           "permission list for " + tool + " lacks a default rule",
                           {{"tool", tool}}});
    }
    return out;
}

std::string confirmation_key(const std::string& tool, const Json& args) {
    Json stripped = args;
    stripped.erase("confirm");
    return tool + ":" + hash_json(stripped);
}

std::string preview_text(const policy::Mutation& m, const policy::EvalContext& ctx) {
    std::string kind = m.kind == policy::Mutation::Kind::insert   ? "insert"
                       : m.kind == policy::Mutation::Kind::update ? "update"
                                                                  : "delete";
    std::string out = kind + " " + m.table;
    std::string assigns;
    for (const auto& a : m.assignments) {
        if (!assigns.empty()) assigns += ", ";
        assigns += a.column + " = " + policy::eval_expr(*a.value, ctx).dump();
    }
    std::string wheres;
    for (const auto& [col, v] : m.where_eq) {
        if (!wheres.empty()) wheres += ", ";
        wheres += col + " = " + policy::eval_expr(*v, ctx).dump();
    }
    if (!wheres.empty()) out += " where " + wheres;
    if (!assigns.empty()) out += (m.kind == policy::Mutation::Kind::insert ? " where " : " set ") +
                                 assigns;
    return out;
}

Runtime::Runtime(datastore::Database base, std::vector<DomainSpec> domains,
                 std::string simulation_time, bool tick_per_turn)
    : base_(std::move(base)),
      domains_(std::move(domains)),
      simulation_time_(std::move(simulation_time)),
      tick_per_turn_(tick_per_turn) {
    for (size_t d = 0; d < domains_.size(); ++d) {
        const auto& spec = domains_[d];
        for (const auto& [tool, meta] : spec.tools) {
            auto cit = spec.policy.contracts.find(tool);
            std::string qualified = spec.prefix.empty() ? tool : spec.prefix + "_" + tool;
            ToolEntry entry{d, tool, cit == spec.policy.contracts.end() ? nullptr : &cit->second,
                            &meta};
            router_[qualified] = entry;
        }
    }
}

std::string Runtime::create_session() {
    std::lock_guard<std::mutex> lock(sessions_mu_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "session_%04zu", ++next_session_);
    auto s = std::make_unique<Session>();
    s->db = base_;  // deep copy
    for (const auto& d : domains_)
        s->auth[d.domain] = {{"authenticated", false}, {"authorized_core_id", nullptr}};
    sessions_[buf] = std::move(s);
    return buf;
}

policy::EvalContext Runtime::make_context(Session& s, const DomainSpec& spec,
                                          const Json& args) const {
    policy::EvalContext ctx;
    ctx.db = &s.db;
    ctx.session = s.auth.at(spec.domain);
    ctx.params = args;
    ctx.now = simulation_time_;
    if (tick_per_turn_) {
        // experimental: one-minute tick per invocation in this session
        ctx.now = format_timestamp(parse_timestamp(simulation_time_) + 60 * s.invocations);
    }
    ctx.core_table = spec.core_entity;
    ctx.core_pk = spec.core_pk;
    std::string prefix = spec.prefix;
    auto* db = &s.db;
    ctx.resolve_table = [db, prefix](const std::string& name) -> const datastore::Table* {
        if (const auto* t = db->find(name)) return t;
        if (!prefix.empty()) return db->find(prefix + "_" + name);
        return nullptr;
    };
    return ctx;
}

namespace {

// next primary key for a table: max existing numeric suffix + 1
std::string allocate_pk(const datastore::Table& t) {
    std::string prefix = to_lower(t.name) + "_";
    uint64_t max_n = 0;
    for (const auto& row : t.rows) {
        if (!row.contains(t.primary_key) || !row.at(t.primary_key).is_string()) continue;
        const std::string& v = row.at(t.primary_key).get_ref<const std::string&>();
        if (v.rfind(prefix, 0) != 0) continue;
        try {
            max_n = std::max<uint64_t>(max_n, std::stoull(v.substr(prefix.size())));
        } catch (...) {
        }
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04llu", static_cast<unsigned long long>(max_n + 1));
    return prefix + buf;
}

bool row_matches(const Json& row, const std::vector<std::pair<std::string, policy::ExprPtr>>& eq,
                 const policy::EvalContext& ctx) {
    for (const auto& [col, vexpr] : eq) {
        Json want = policy::eval_expr(*vexpr, ctx);
        Json have = row.contains(col) ? row.at(col) : Json(nullptr);
        if (have.is_number() && want.is_number()) {
            if (have.get<double>() != want.get<double>()) return false;
        } else if (have != want) {
            return false;
        }
    }
    return true;
}

bool confirm_flag(const Json& args) {
    return args.contains("confirm") && args.at("confirm").is_boolean() &&
           args.at("confirm").get<bool>();
}

bool validate_value(const policy::ValidationRule& rule, const Json& value, std::string& why) {
    using Kind = policy::ValidationRule::Kind;
    switch (rule.kind) {
        case Kind::pattern: {
            if (!value.is_string()) {
                why = "expected string";
                return false;
            }
            std::regex re(rule.pattern);
            if (!std::regex_match(value.get<std::string>(), re)) {
                why = "does not match pattern " + rule.pattern;
                return false;
            }
            return true;
        }
        case Kind::range: {
            if (!value.is_number()) {
                why = "expected number";
                return false;
            }
            double v = value.get<double>();
            if (v < static_cast<double>(rule.lo) || v > static_cast<double>(rule.hi)) {
                why = "out of range " + std::to_string(rule.lo) + ".." + std::to_string(rule.hi);
                return false;
            }
            return true;
        }
        case Kind::one_of: {
            if (value.is_string()) {
                if (std::find(rule.allowed.begin(), rule.allowed.end(),
                              value.get<std::string>()) != rule.allowed.end())
                    return true;
            }
            why = "not one of the allowed values";
            return false;
        }
    }
    why = "unknown rule";
    return false;
}

}  // namespace

InvocationResult Runtime::invoke(const std::string& session_id, const std::string& tool_name,
                                 Json args) {
    auto rit = router_.find(tool_name);
    if (rit == router_.end())
        return {Status::error, Json::object(), "UnknownTool: " + tool_name};

    Session* session = nullptr;
    {
        std::lock_guard<std::mutex> lock(sessions_mu_);
        auto sit = sessions_.find(session_id);
        if (sit == sessions_.end())
            return {Status::error, Json::object(), "UnknownSession: " + session_id};
        session = sit->second.get();
    }

    std::lock_guard<std::mutex> session_lock(session->mu);
    try {
        return run_tool(*session, rit->second, std::move(args));
    } catch (const std::exception& e) {
        // contract evaluation bug — never let it escape the router
        return {Status::error, Json::object(), std::string("InternalError: ") + e.what()};
    }
}

InvocationResult Runtime::run_tool(Session& s, const ToolEntry& entry, Json args) {
    const DomainSpec& spec = domains_[entry.domain_index];
    if (!entry.contract)
        return {Status::error, Json::object(), "InternalError: no contract for " + entry.bare_name};
    const policy::ToolContract& contract = *entry.contract;
    const DomainSpec::ToolMeta& meta = *entry.meta;
    ++s.invocations;

    if (!args.is_object()) args = Json::object();
    // unknown extra args are ignored: keep declared params plus confirm
    Json kept = Json::object();
    for (const auto& p : meta.params)
        if (args.contains(p)) kept[p] = args.at(p);
    if (args.contains("confirm")) kept["confirm"] = args.at("confirm");
    args = std::move(kept);

    policy::EvalContext ctx = make_context(s, spec, args);

    auto rejected = [&](const std::string& reason) {
        return InvocationResult{Status::rejected, Json::object(), reason};
    };

    try {
        // (1) preconditions: global rules first (authorize is the gate itself)
        if (meta.role != "authorize") {
            for (const auto& g : spec.policy.global_rules)
                if (!policy::evaluate_predicate(*g, ctx))
                    return rejected("precondition failed: " + policy::print_expr(*g));
        }
        for (const auto& p : contract.preconditions)
            if (!policy::evaluate_predicate(*p, ctx))
                return rejected("precondition failed: " + policy::print_expr(*p));

        // (2) input validation; required params must be present
        for (const auto& p : meta.params) {
            if (p == spec.core_pk && meta.role != "authorize") continue;  // session-bound
            if (p == "confirm") continue;
            if (!args.contains(p)) return rejected("missing required parameter '" + p + "'");
        }
        for (const auto& [param, rule] : contract.input_validation) {
            if (!args.contains(param)) continue;
            std::string why;
            if (!validate_value(rule, args.at(param), why))
                return rejected("invalid parameter '" + param + "': " + why);
        }

        // (3) permission rules, first match wins
        const policy::PermissionRule* decision = nullptr;
        for (const auto& r : contract.permission_rules) {
            if (!r.condition || policy::evaluate_predicate(*r.condition, ctx)) {
                decision = &r;
                break;
            }
        }
        if (!decision) return rejected("not permitted");
        if (!decision->permit) return rejected(decision->reason);

        // authorize: bind the session, return status only
        if (meta.role == "authorize") {
            Json core_id = args.value(spec.core_pk, Json());
            s.auth[spec.domain] = {{"authenticated", true}, {"authorized_core_id", core_id}};
            return {Status::ok, Json{{"status", "Success"}}, ""};
        }

        // (4) preview-then-commit gate
        if (meta.mutating && meta.requires_confirmation && !confirm_flag(args)) {
            std::string preview;
            for (const auto& m : contract.side_effects) {
                if (!preview.empty()) preview += "; ";
                preview += preview_text(m, ctx);
            }
            std::string key = confirmation_key(entry.bare_name, args);
            Json payload = {{"needs_confirmation", true}, {"action_preview", preview}};
            s.pending_confirmations[key] = payload;
            return {Status::needs_confirmation, payload, ""};
        }

        // (5) side effects, atomically
        Json changes = Json::array();
        if (!contract.side_effects.empty()) {
            datastore::Snapshot before = datastore::snapshot(s.db);
            try {
                for (const auto& m : contract.side_effects) {
                    const datastore::Table* resolved = ctx.table(m.table);
                    if (!resolved)
                        throw policy::PredicateTypeError("unknown table '" + m.table + "'");
                    datastore::Table& table = *s.db.find(resolved->name);
                    if (m.kind == policy::Mutation::Kind::insert) {
                        Json row = Json::object();
                        for (const auto& a : m.assignments)
                            row[a.column] = policy::eval_expr(*a.value, ctx);
                        if (!row.contains(table.primary_key))
                            row[table.primary_key] = allocate_pk(table);
                        table.rows.push_back(row);
                        changes.push_back(
                            {{"kind", "insert"}, {"table", table.name}, {"row", row}});
                    } else if (m.kind == policy::Mutation::Kind::update) {
                        size_t matched = 0;
                        for (auto& row : table.rows) {
                            if (!row_matches(row, m.where_eq, ctx)) continue;
                            for (const auto& a : m.assignments)
                                row[a.column] = policy::eval_expr(*a.value, ctx);
                            ++matched;
                        }
                        changes.push_back(
                            {{"kind", "update"}, {"table", table.name}, {"matched", matched}});
                    } else {
                        size_t beforeN = table.rows.size();
                        auto end = std::remove_if(
                            table.rows.begin(), table.rows.end(),
                            [&](const Json& row) { return row_matches(row, m.where_eq, ctx); });
                        table.rows.erase(end, table.rows.end());
                        changes.push_back({{"kind", "delete"},
                                           {"table", table.name},
                                           {"removed", beforeN - table.rows.size()}});
                    }
                }
            } catch (...) {
                datastore::restore(s.db, before);
                throw;
            }
            if (meta.requires_confirmation)
                s.pending_confirmations.erase(confirmation_key(entry.bare_name, args));
        }

        // (6) output
        Json payload;
        switch (contract.output.kind) {
            case policy::OutputSpec::Kind::none:
                payload = meta.mutating ? Json{{"result", "success"}, {"changes", changes}}
                                        : Json{{"result", "success"}};
                break;
            case policy::OutputSpec::Kind::row: {
                const datastore::Table* t = ctx.table(contract.output.table);
                if (!t)
                    throw policy::PredicateTypeError("unknown table '" + contract.output.table +
                                                     "'");
                payload = Json(nullptr);
                for (const auto& row : t->rows)
                    if (row_matches(row, contract.output.where_eq, ctx)) {
                        payload = row;
                        break;
                    }
                break;
            }
            case policy::OutputSpec::Kind::rows: {
                const datastore::Table* t = ctx.table(contract.output.table);
                if (!t)
                    throw policy::PredicateTypeError("unknown table '" + contract.output.table +
                                                     "'");
                payload = Json::array();
                for (const auto& row : t->rows)
                    if (contract.output.where_eq.empty() ||
                        row_matches(row, contract.output.where_eq, ctx))
                        payload.push_back(row);
                break;
            }
            case policy::OutputSpec::Kind::value:
                payload = policy::eval_expr(*contract.output.value, ctx);
                break;
        }
        return {Status::ok, payload, ""};
    } catch (const policy::PredicateTypeError& e) {
        return {Status::error, Json::object(), std::string("InternalError: ") + e.what()};
    }
}

InvocationResult Runtime::authorize(const std::string& session_id, const Json& core_id,
                                    const std::string& domain) {
    for (const auto& [qualified, entry] : router_) {
        const DomainSpec& spec = domains_[entry.domain_index];
        if (entry.meta->role != "authorize") continue;
        if (!domain.empty() && spec.domain != domain && spec.prefix != domain) continue;
        Json args = {{spec.core_pk, core_id}};
        return invoke(session_id, qualified, args);
    }
    return {Status::error, Json::object(), "UnknownTool: no authorize tool registered"};
}

std::vector<std::string> Runtime::tool_names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : router_) out.push_back(name);
    return out;
}

std::string Runtime::session_db_hash(const std::string& session_id) const {
    return session_snapshot(session_id).address();
}

datastore::Snapshot Runtime::session_snapshot(const std::string& session_id) const {
    std::lock_guard<std::mutex> lock(sessions_mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error("UnknownSession", session_id);
    std::lock_guard<std::mutex> session_lock(it->second->mu);
    return datastore::snapshot(it->second->db);
}

bool Runtime::session_authenticated(const std::string& session_id,
                                    const std::string& domain) const {
    std::lock_guard<std::mutex> lock(sessions_mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return false;
    auto ait = it->second->auth.find(domain);
    return ait != it->second->auth.end() && ait->second.value("authenticated", false);
}

}  // namespace toolforge::runtime
