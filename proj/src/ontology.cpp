#include "toolforge/ontology.hpp"

#include <algorithm>

#include "toolforge/ports.hpp"

namespace toolforge::ontology {

namespace {

const std::vector<std::string>& strategy_names() {
    static const std::vector<std::string> names = {"horizontal", "diagonal", "temporal",
                                                   "hierarchical", "role_based"};
    return names;
}

// Overly generic entity names the provider contract forbids; the mechanical
// part we can enforce locally.
bool deny_listed(const std::string& name) {
    std::string lower = to_lower(name);
    return lower == "person" || lower == "thing" || lower == "item";
}

}  // namespace

std::string strategy_name(Strategy s) { return strategy_names()[static_cast<size_t>(s)]; }

Strategy strategy_from_name(const std::string& name) {
    const auto& names = strategy_names();
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error("BadStrategy", name);
    return static_cast<Strategy>(it - names.begin());
}

Json DomainTopic::to_json() const {
    return {{"label", label}, {"parent_seed", parent_seed}, {"strategy", strategy_name(strategy)}};
}

DomainTopic DomainTopic::from_json(const Json& j) {
    return {j.at("label"), j.at("parent_seed"), strategy_from_name(j.at("strategy"))};
}

std::string value_type_name(ValueType t) {
    switch (t) {
        case ValueType::string_: return "string";
        case ValueType::integer: return "integer";
        case ValueType::number: return "number";
        case ValueType::boolean: return "boolean";
        case ValueType::timestamp: return "timestamp";
        case ValueType::identifier: return "identifier";
        case ValueType::enum_: return "enum";
    }
    return "string";
}

ValueType value_type_from_name(const std::string& name) {
    for (int i = 0; i <= static_cast<int>(ValueType::enum_); ++i)
        if (value_type_name(static_cast<ValueType>(i)) == name)
            return static_cast<ValueType>(i);
    throw Error("BadValueType", name);
}

std::string dimension_name(Dimension d) {
    switch (d) {
        case Dimension::physical: return "physical";
        case Dimension::lifecycle: return "lifecycle";
        case Dimension::state: return "state";
        case Dimension::geospatial: return "geospatial";
        case Dimension::other: return "other";
    }
    return "other";
}

Dimension dimension_from_name(const std::string& name) {
    for (int i = 0; i <= static_cast<int>(Dimension::other); ++i)
        if (dimension_name(static_cast<Dimension>(i)) == name)
            return static_cast<Dimension>(i);
    throw Error("BadDimension", name);
}

Json AttributeSpec::to_json() const {
    Json j = {{"name", name},
              {"value_type", value_type_name(value_type)},
              {"dimension", dimension_name(dimension)}};
    if (!categories.empty()) j["categories"] = categories;
    if (!range.empty()) j["range"] = range;
    return j;
}

AttributeSpec AttributeSpec::from_json(const Json& j) {
    AttributeSpec a;
    a.name = j.at("name");
    a.value_type = value_type_from_name(j.at("value_type"));
    a.dimension = dimension_from_name(j.at("dimension"));
    if (j.contains("categories")) a.categories = j["categories"].get<std::vector<std::string>>();
    if (j.contains("range")) a.range = j["range"];
    return a;
}

Json EntitySchema::to_json() const {
    Json attrs = Json::object();
    for (const auto& [k, v] : attributes) attrs[k] = v.to_json();
    return {{"name", name},
            {"is_person", is_person},
            {"primary_key", primary_key},
            {"attributes", attrs},
            {"domain_hint", domain_hint}};
}

EntitySchema EntitySchema::from_json(const Json& j) {
    EntitySchema e;
    e.name = j.at("name");
    e.is_person = j.at("is_person");
    e.primary_key = j.at("primary_key");
    e.domain_hint = j.value("domain_hint", "");
    for (const auto& [k, v] : j.at("attributes").items())
        e.attributes[k] = AttributeSpec::from_json(v);
    return e;
}

std::vector<std::string> EntityGraph::neighbors(const std::string& person) const {
    std::vector<std::string> out;
    for (const auto& e : edges)
        if (e.person == person) out.push_back(e.target);
    return out;
}

Json EntityGraph::to_json(const std::vector<EntitySchema>& schemas) const {
    std::map<std::string, bool> person_flag;
    for (const auto& s : schemas) person_flag[s.name] = s.is_person;
    Json nodes_j = Json::array();
    for (const auto& n : nodes)
        nodes_j.push_back({{"id", n}, {"is_person", person_flag.count(n) ? person_flag[n] : false}});
    Json links = Json::array();
    for (const auto& e : edges)
        links.push_back(
            {{"source", e.person}, {"target", e.target}, {"domain_context", e.domain_context}});
    return {{"directed", true}, {"multigraph", false}, {"nodes", nodes_j}, {"links", links}};
}

EntityGraph EntityGraph::from_json(const Json& j) {
    EntityGraph g;
    for (const auto& n : j.at("nodes")) g.nodes.insert(n.at("id").get<std::string>());
    for (const auto& l : j.at("links"))
        g.edges.insert({l.at("source"), l.at("target"), l.value("domain_context", "")});
    return g;
}

DomainCorpus expand_domains(const std::vector<std::string>& seeds, size_t target_count,
                            size_t batch_size, SynthesisPort& provider,
                            ProgressLog* progress_log) {
    if (seeds.empty()) throw Error("EmptySeeds", "expand_domains requires seeds");
    if (target_count < seeds.size())
        throw Error("BadTarget", "target_count smaller than seed count");
    if (batch_size == 0) throw Error("BadBatch", "batch_size must be positive");

    DomainCorpus corpus;
    std::set<std::string> seen;
    for (const auto& s : seeds) {
        if (!is_snake_case_label(s)) throw FormatViolation("seed label not snake_case: " + s);
        if (seen.insert(s).second) corpus.push_back({s, "", Strategy::horizontal});
    }

    std::map<size_t, Json> done_batches;
    if (progress_log)
        for (const auto& rec : progress_log->entries())
            done_batches[rec.at("batch_index").get<size_t>()] = rec.at("accepted");

    size_t batch_index = 0;
    int format_strikes = 0;
    int stall_strikes = 0;
    while (corpus.size() < target_count) {
        std::vector<DomainTopic> accepted;
        bool from_log = done_batches.count(batch_index) > 0;
        if (from_log) {
            for (const auto& t : done_batches[batch_index])
                accepted.push_back(DomainTopic::from_json(t));
        } else {
            std::vector<std::string> existing;
            existing.reserve(corpus.size());
            for (const auto& t : corpus) existing.push_back(t.label);
            auto batch = provider.propose_domains(seeds, existing, batch_size);
            bool had_invalid = false;
            for (auto& topic : batch) {
                if (!is_snake_case_label(topic.label)) {
                    had_invalid = true;
                    continue;
                }
                if (seen.count(topic.label)) continue;
                accepted.push_back(topic);
            }
            format_strikes = had_invalid ? format_strikes + 1 : 0;
            if (format_strikes >= 3)
                throw FormatViolation("provider kept emitting invalid labels after 3 retries");
        }
        size_t added = 0;
        for (const auto& topic : accepted) {
            if (seen.insert(topic.label).second) {
                corpus.push_back(topic);
                ++added;
                if (corpus.size() == target_count) break;
            }
        }
        if (!from_log && progress_log) {
            Json acc = Json::array();
            for (const auto& t : accepted) acc.push_back(t.to_json());
            progress_log->append({{"batch_index", batch_index}, {"accepted", acc}});
        }
        stall_strikes = added == 0 ? stall_strikes + 1 : 0;
        if (stall_strikes >= 3 && corpus.size() < target_count)
            throw ProviderExhausted("no new unique topics after 3 batches; have " +
                                    std::to_string(corpus.size()) + "/" +
                                    std::to_string(target_count));
        ++batch_index;
    }
    return corpus;
}

std::string normalize_primary_key(const std::string& entity_name) {
    if (entity_name.empty()) throw Error("EmptyName", "normalize_primary_key on empty name");
    std::string base = entity_name;
    auto ends_with = [&](const char* suf) {
        size_t n = std::strlen(suf);
        return base.size() > n && base.compare(base.size() - n, n, suf) == 0;
    };
    if (ends_with("_id") || ends_with("_Id") || ends_with("_ID"))
        base.resize(base.size() - 3);
    else if (ends_with("ID") || ends_with("Id"))
        base.resize(base.size() - 2);
    return to_lower(base) + "_id";
}

std::vector<EntitySchema> extract_entities(const DomainCorpus& corpus, SynthesisPort& provider) {
    if (corpus.empty()) throw Error("EmptyCorpus", "extract_entities requires a corpus");
    auto raw = provider.propose_entities(corpus);

    std::vector<EntitySchema> out;
    std::set<std::string> names;
    for (auto& e : raw) {
        if (to_lower(e.name) == "session") continue;  // reserved name
        if (deny_listed(e.name)) continue;
        if (!names.insert(e.name).second) continue;
        e.primary_key = normalize_primary_key(e.name);
        out.push_back(std::move(e));
    }
    if (out.empty()) throw EmptyExtraction("no entities survived sanitization");
    return out;
}

EntityGraph build_entity_graph(const std::vector<EntitySchema>& entities,
                               RelationOraclePort& oracle, size_t batch_size,
                               ProgressLog* progress_log, unsigned jobs) {
    if (batch_size == 0) throw Error("BadBatch", "batch_size must be positive");
    std::vector<EntitySchema> sorted = entities;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });

    std::vector<const EntitySchema*> persons;
    for (const auto& e : sorted)
        if (e.is_person) persons.push_back(&e);
    if (persons.empty()) throw NoPersonEntities("entity graph needs at least one person");

    // (person, batch_index) -> recorded edges
    std::map<std::pair<std::string, size_t>, Json> done;
    if (progress_log)
        for (const auto& rec : progress_log->entries())
            done[{rec.at("person"), rec.at("batch_index").get<size_t>()}] = rec.at("edges");

    EntityGraph graph;
    for (const auto& e : sorted) graph.nodes.insert(e.name);

    std::mutex graph_mu;
    auto run_person = [&](size_t pi) {
        const EntitySchema& person = *persons[pi];
        std::vector<EntitySchema> targets;
        for (const auto& e : sorted)
            if (e.name != person.name) targets.push_back(e);
        size_t n_batches = (targets.size() + batch_size - 1) / batch_size;
        for (size_t b = 0; b < n_batches; ++b) {
            auto key = std::make_pair(person.name, b);
            std::vector<EntityEdge> found;
            auto it = done.find(key);
            if (it != done.end()) {
                for (const auto& ej : it->second)
                    found.push_back({person.name, ej.at("target"), ej.value("context", "")});
            } else {
                std::vector<EntitySchema> batch(
                    targets.begin() + static_cast<long>(b * batch_size),
                    targets.begin() +
                        static_cast<long>(std::min(targets.size(), (b + 1) * batch_size)));
                auto rels = oracle.relate(person, batch);
                Json edges_j = Json::array();
                for (const auto& r : rels) {
                    found.push_back({person.name, r.target, r.domain_context});
                    edges_j.push_back({{"target", r.target}, {"context", r.domain_context}});
                }
                if (progress_log)
                    progress_log->append(
                        {{"person", person.name}, {"batch_index", b}, {"edges", edges_j}});
            }
            std::lock_guard<std::mutex> lock(graph_mu);
            for (const auto& edge : found) {
                if (edge.target == edge.person) continue;
                // first oracle-provided context wins; alternates dropped
                bool exists = false;
                for (const auto& prev : graph.edges)
                    if (prev.person == edge.person && prev.target == edge.target) {
                        exists = true;
                        break;
                    }
                if (!exists) graph.edges.insert(edge);
            }
        }
    };
    parallel_for(persons.size(), jobs, run_person);
    return graph;
}

std::vector<Violation> validate_entity_graph(const EntityGraph& graph,
                                             const std::vector<EntitySchema>& schemas) {
    std::map<std::string, bool> person_flag;
    for (const auto& s : schemas) person_flag[s.name] = s.is_person;

    std::vector<Violation> out;
    for (const auto& e : graph.edges) {
        if (!graph.nodes.count(e.person) || !graph.nodes.count(e.target))
            out.push_back({"UnknownNode", "edge endpoint not a node",
                           {{"source", e.person}, {"target", e.target}}});
        if (e.person == e.target)
            out.push_back({"SelfEdge", "self edge on " + e.person, {{"node", e.person}}});
        auto it = person_flag.find(e.person);
        if (it == person_flag.end() || !it->second)
            out.push_back({"NonPersonSource", "edge source is not a person entity",
                           {{"source", e.person}, {"target", e.target}}});
    }
    return out;
}

Json corpus_to_json(const DomainCorpus& corpus) {
    Json arr = Json::array();
    for (const auto& t : corpus) arr.push_back(t.to_json());
    return {{"topics", arr}};
}

DomainCorpus corpus_from_json(const Json& j) {
    DomainCorpus out;
    for (const auto& t : j.at("topics")) out.push_back(DomainTopic::from_json(t));
    return out;
}

Json schemas_to_json(const std::vector<EntitySchema>& schemas) {
    Json arr = Json::array();
    for (const auto& s : schemas) arr.push_back(s.to_json());
    return {{"entities", arr}};
}

std::vector<EntitySchema> schemas_from_json(const Json& j) {
    std::vector<EntitySchema> out;
    for (const auto& s : j.at("entities")) out.push_back(EntitySchema::from_json(s));
    return out;
}

}  // namespace toolforge::ontology
