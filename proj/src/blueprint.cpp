#include "toolforge/blueprint.hpp"

#include <algorithm>

#include "toolforge/ports.hpp"

namespace toolforge::blueprint {

const RelAttribute* RelationshipSchema::find(const std::string& attr) const {
    for (const auto& [name, spec] : attributes)
        if (name == attr) return &spec;
    return nullptr;
}

const ToolSpec* Blueprint::find_tool(const std::string& name) const {
    for (const auto& f : functions)
        if (f.name == name) return &f;
    return nullptr;
}

std::vector<std::string> Blueprint::entity_names() const {
    std::vector<std::string> out = {core_entity};
    out.insert(out.end(), peripheral_entities.begin(), peripheral_entities.end());
    return out;
}

Json Blueprint::to_json() const {
    Json rels = Json::array();
    for (const auto& r : relationships) {
        Json attrs = Json::object();
        for (const auto& [name, a] : r.attributes) {
            attrs[name] = {{"type", a.value_type},
                           {"value_from_entity", a.value_from_entity},
                           {"range", a.range}};
        }
        rels.push_back({{"name", r.name}, {"description", r.description}, {"attributes", attrs}});
    }
    Json fns = Json::array();
    for (const auto& f : functions) {
        Json params = Json::object();
        for (const auto& [name, p] : f.parameters) {
            Json pj = {{"description", p.description}, {"type", p.value_type}, {"range", p.range}};
            if (p.free_text) pj["free_text"] = true;
            params[name] = pj;
        }
        Json fj = {{"name", f.name},
                   {"description", f.description},
                   {"legal_accessor", f.legal_accessor},
                   {"parameters", params},
                   {"mutating", f.mutating},
                   {"requires_confirmation", f.requires_confirmation}};
        if (!f.role.empty()) fj["role"] = f.role;
        fns.push_back(fj);
    }
    return {{"MCP_server_name", server_name},
            {"description", description},
            {"core_entity", core_entity},
            {"peripheral_entities", peripheral_entities},
            {"relationships", rels},
            {"functions", fns}};
}

Blueprint Blueprint::from_json(const Json& j) {
    Blueprint bp;
    bp.server_name = j.at("MCP_server_name");
    bp.description = j.value("description", "");
    bp.core_entity = j.at("core_entity");
    bp.peripheral_entities = j.at("peripheral_entities").get<std::vector<std::string>>();
    for (const auto& rj : j.at("relationships")) {
        RelationshipSchema r;
        r.name = rj.at("name");
        r.description = rj.value("description", "");
        for (const auto& [name, aj] : rj.at("attributes").items()) {
            RelAttribute a;
            a.value_type = aj.value("type", "str");
            a.value_from_entity = aj.value("value_from_entity", "");
            a.range = aj.value("range", "");
            r.attributes.emplace_back(name, a);
        }
        std::sort(r.attributes.begin(), r.attributes.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
        bp.relationships.push_back(std::move(r));
    }
    for (const auto& fj : j.at("functions")) {
        ToolSpec f;
        f.name = fj.at("name");
        f.description = fj.value("description", "");
        if (fj.contains("legal_accessor"))
            f.legal_accessor = fj["legal_accessor"].get<std::vector<std::string>>();
        f.mutating = fj.value("mutating", false);
        f.requires_confirmation = fj.value("requires_confirmation", false);
        f.role = fj.value("role", "");
        for (const auto& [name, pj] : fj.at("parameters").items()) {
            ToolParam p;
            p.description = pj.value("description", "");
            p.value_type = pj.value("type", "str");
            p.range = pj.value("range", "");
            p.free_text = pj.value("free_text", false);
            f.parameters.emplace_back(name, p);
        }
        std::sort(f.parameters.begin(), f.parameters.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
        bp.functions.push_back(std::move(f));
    }
    return bp;
}

Json Outline::to_json() const {
    return {{"name", name}, {"core", core}, {"peripherals", peripherals}};
}

std::vector<Outline> sample_outlines(const ontology::EntityGraph& graph,
                                     const std::string& person, size_t count,
                                     size_t max_peripherals, uint64_t seed) {
    if (max_peripherals == 0) throw Error("BadConfig", "max_peripherals must be positive");
    auto neighbors = graph.neighbors(person);
    std::sort(neighbors.begin(), neighbors.end());
    if (neighbors.empty())
        throw IsolatedPerson(person + " has no neighbors in the entity graph");
    if (count == 0) return {};

    Rng rng(derive_seed(seed, "outlines/" + person));
    std::vector<Outline> out;
    std::set<std::vector<std::string>> taken;
    size_t max_size = std::min(max_peripherals, neighbors.size());
    // distinct subsets; bail out once the pool is clearly exhausted
    size_t attempts = 0;
    while (out.size() < count && attempts < count * 20 + 50) {
        ++attempts;
        size_t size = static_cast<size_t>(rng.range(1, static_cast<int64_t>(max_size)));
        std::vector<std::string> pool = neighbors;
        rng.shuffle(pool);
        std::vector<std::string> subset(pool.begin(), pool.begin() + static_cast<long>(size));
        std::sort(subset.begin(), subset.end());
        if (!taken.insert(subset).second) continue;
        std::string name = person;
        for (const auto& p : subset) name += p;
        name += "Server";
        out.push_back({name, person, subset});
    }
    return out;
}

Blueprint synthesize_blueprint(const Outline& outline,
                               const std::map<std::string, ontology::EntitySchema>& catalog,
                               SynthesisPort& provider, const BlueprintConfig& config) {
    Json entity_defs = Json::object();
    for (const auto& name : outline.peripherals) {
        auto it = catalog.find(name);
        if (it != catalog.end()) entity_defs[name] = it->second.to_json();
    }
    if (auto it = catalog.find(outline.core); it != catalog.end())
        entity_defs[outline.core] = it->second.to_json();

    BlueprintConfig cfg = config;
    cfg.catalog = &catalog;

    std::vector<Violation> feedback;
    for (size_t round = 0; round < cfg.max_rounds; ++round) {
        Json draft = provider.draft_blueprint(outline.to_json(), entity_defs, feedback);
        Blueprint bp;
        try {
            bp = Blueprint::from_json(draft);
        } catch (const std::exception& e) {
            feedback = {{"MalformedBlueprint", e.what(), Json::object()}};
            continue;
        }
        feedback = validate_blueprint(bp, cfg);
        if (feedback.empty()) return bp;
    }
    throw FeedbackBudgetExhausted("blueprint for " + outline.name + " still invalid after " +
                                  std::to_string(cfg.max_rounds) + " rounds: " +
                                  violations_to_json(feedback).dump());
}

std::vector<Violation> validate_blueprint(const Blueprint& bp, const BlueprintConfig& config) {
    std::vector<Violation> out;
    auto flag = [&](std::string kind, std::string msg, Json detail = Json::object()) {
        out.push_back({std::move(kind), std::move(msg), std::move(detail)});
    };

    std::set<std::string> entities(bp.peripheral_entities.begin(), bp.peripheral_entities.end());
    entities.insert(bp.core_entity);
    std::set<std::string> rel_names;
    for (const auto& r : bp.relationships) rel_names.insert(r.name);

    if (config.catalog) {
        for (const auto& e : entities)
            if (!config.catalog->count(e))
                flag("UnknownEntity", "entity not in catalog: " + e, {{"entity", e}});
    }

    std::string core_pk = ontology::normalize_primary_key(bp.core_entity);

    for (const auto& r : bp.relationships) {
        if (!is_identifier(r.name))
            flag("BadIdentifier", "relationship name: " + r.name, {{"relationship", r.name}});
        bool has_core_fk = false;
        bool has_own_id = false;
        std::string own_id = ontology::normalize_primary_key(r.name);
        for (const auto& [attr, spec] : r.attributes) {
            if (!is_identifier(attr))
                flag("BadIdentifier", "attribute name: " + attr, {{"relationship", r.name}});
            if (attr == own_id && spec.value_from_entity.empty()) has_own_id = true;
            if (!spec.value_from_entity.empty()) {
                if (rel_names.count(spec.value_from_entity)) {
                    flag("RelationshipReference",
                         r.name + "." + attr + " references relationship " +
                             spec.value_from_entity,
                         {{"relationship", r.name}, {"attribute", attr}});
                    continue;
                }
                if (!entities.count(spec.value_from_entity))
                    flag("UnknownEntity",
                         r.name + "." + attr + " references unknown entity " +
                             spec.value_from_entity,
                         {{"relationship", r.name}, {"attribute", attr}});
                if (attr.size() > 3 && attr.compare(attr.size() - 3, 3, "_id") == 0) {
                    std::string expected =
                        ontology::normalize_primary_key(spec.value_from_entity);
                    if (attr != expected)
                        flag("BadForeignKeyName",
                             r.name + "." + attr + " should be " + expected,
                             {{"relationship", r.name}, {"attribute", attr}});
                    if (spec.value_from_entity == bp.core_entity) has_core_fk = true;
                }
            }
        }
        if (!has_core_fk)
            flag("StarSchemaViolation",
                 "relationship " + r.name + " lacks core-entity foreign key " + core_pk,
                 {{"relationship", r.name}, {"expected", core_pk}});
        if (!has_own_id)
            flag("MissingRelationshipId", "relationship " + r.name + " lacks its own " + own_id,
                 {{"relationship", r.name}});
    }

    // relationships per (core, peripheral) pair
    std::map<std::string, size_t> pair_counts;
    for (const auto& r : bp.relationships) {
        std::set<std::string> involved;
        for (const auto& [attr, spec] : r.attributes)
            if (!spec.value_from_entity.empty() && entities.count(spec.value_from_entity))
                involved.insert(spec.value_from_entity);
        for (const auto& e : involved) {
            if (e == bp.core_entity) continue;
            ++pair_counts[e];
        }
    }
    for (const auto& [peripheral, n] : pair_counts)
        if (n > config.max_relationships)
            flag("TooManyRelationships",
                 std::to_string(n) + " relationships between " + bp.core_entity + " and " +
                     peripheral,
                 {{"peripheral", peripheral}, {"count", n}});

    size_t auth_count = 0;
    for (const auto& f : bp.functions) {
        if (!is_snake_case(f.name) && !is_identifier(f.name))
            flag("BadIdentifier", "tool name: " + f.name, {{"tool", f.name}});
        for (const auto& [p, spec] : f.parameters)
            if (!is_identifier(p))
                flag("BadIdentifier", "parameter name: " + p, {{"tool", f.name}});
        if (f.role == "authorize") {
            ++auth_count;
            if (f.parameters.size() != 1 || f.parameters[0].first != core_pk)
                flag("AuthSignature",
                     "authorize must take exactly one parameter named " + core_pk,
                     {{"tool", f.name}});
            if (f.mutating)
                flag("AuthSignature", "authorize must not be mutating", {{"tool", f.name}});
        }
        if (f.requires_confirmation && !f.mutating)
            flag("MutationFlagMismatch",
                 f.name + " requires confirmation but is not mutating", {{"tool", f.name}});
    }
    if (auth_count == 0)
        flag("MissingAuthGate", "no tool with role authorize");
    else if (auth_count > 1)
        flag("DuplicateAuthGate", std::to_string(auth_count) + " authorize tools");

    if (bp.functions.size() < config.min_functions)
        flag("TooFewFunctions",
             std::to_string(bp.functions.size()) + " functions, need " +
                 std::to_string(config.min_functions),
             {{"count", bp.functions.size()}});

    return out;
}

std::string coerce_json_type(const std::string& t) {
    if (t == "str" || t == "string" || t == "identifier" || t == "timestamp" || t == "enum")
        return "string";
    if (t == "int" || t == "integer") return "integer";
    if (t == "float" || t == "double" || t == "number") return "number";
    if (t == "bool" || t == "boolean") return "boolean";
    throw UnknownValueType(t);
}

std::vector<ToolSchemaDoc> standardize_tools(const Blueprint& bp) {
    std::vector<ToolSchemaDoc> out;
    for (const auto& f : bp.functions) {
        ToolSchemaDoc doc;
        doc.name = f.name;
        doc.description = f.description;
        Json properties = Json::object();
        for (const auto& [p, spec] : f.parameters) {
            Json pj = {{"type", coerce_json_type(spec.value_type)},
                       {"description", spec.description}};
            if (!spec.range.empty()) pj["range"] = spec.range;
            properties[p] = pj;
            doc.required.push_back(p);
        }
        std::sort(doc.required.begin(), doc.required.end());
        doc.parameters = {{"type", "object"},
                          {"properties", properties},
                          {"required", doc.required}};
        out.push_back(std::move(doc));
    }
    return out;
}

Json ToolSchemaDoc::to_json() const {
    return {{"name", name}, {"description", description}, {"parameters", parameters}};
}

ToolSchemaDoc ToolSchemaDoc::from_json(const Json& j) {
    ToolSchemaDoc d;
    d.name = j.at("name");
    d.description = j.value("description", "");
    d.parameters = j.at("parameters");
    d.required = d.parameters.value("required", std::vector<std::string>{});
    return d;
}

Json tool_docs_to_json(const std::string& server, const std::vector<ToolSchemaDoc>& docs) {
    Json tools = Json::array();
    for (const auto& d : docs) tools.push_back(d.to_json());
    return {{"server", server}, {"tools", tools}};
}

std::vector<ToolSchemaDoc> tool_docs_from_json(const Json& j) {
    std::vector<ToolSchemaDoc> out;
    for (const auto& t : j.at("tools")) out.push_back(ToolSchemaDoc::from_json(t));
    return out;
}

}  // namespace toolforge::blueprint
