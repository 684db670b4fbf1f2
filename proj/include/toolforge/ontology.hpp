#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "toolforge/common.hpp"

namespace toolforge {

class SynthesisPort;
class RelationOraclePort;

namespace ontology {

TOOLFORGE_ERROR(FormatViolation);
TOOLFORGE_ERROR(ProviderExhausted);
TOOLFORGE_ERROR(EmptyExtraction);
TOOLFORGE_ERROR(NoPersonEntities);

enum class Strategy { horizontal, diagonal, temporal, hierarchical, role_based };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct DomainTopic {
    std::string label;        // snake_case, 1-3 terms
    std::string parent_seed;
    Strategy strategy = Strategy::horizontal;

    Json to_json() const;
    static DomainTopic from_json(const Json& j);
};

using DomainCorpus = std::vector<DomainTopic>;

enum class ValueType { string_, integer, number, boolean, timestamp, identifier, enum_ };

std::string value_type_name(ValueType t);
ValueType value_type_from_name(const std::string& name);

enum class Dimension { physical, lifecycle, state, geospatial, other };

std::string dimension_name(Dimension d);
Dimension dimension_from_name(const std::string& name);

struct AttributeSpec {
    std::string name;  // snake_case
    ValueType value_type = ValueType::string_;
    std::vector<std::string> categories;  // enum only
    Dimension dimension = Dimension::other;
    std::string range;  // optional, e.g. "1..100" or "2024-01-01T00:00:00..2025-12-31T00:00:00"

    Json to_json() const;
    static AttributeSpec from_json(const Json& j);
};

struct EntitySchema {
    std::string name;  // UpperCamelCase
    bool is_person = false;
    std::string primary_key;                       // lowercase(name) + "_id"
    std::map<std::string, AttributeSpec> attributes;  // keyed by name
    std::string domain_hint;  // topic label the entity came from

    Json to_json() const;
    static EntitySchema from_json(const Json& j);
};

struct EntityEdge {
    std::string person;
    std::string target;
    std::string domain_context;

    bool operator<(const EntityEdge& o) const {
        return std::tie(person, target, domain_context) <
               std::tie(o.person, o.target, o.domain_context);
    }
    bool operator==(const EntityEdge& o) const {
        return person == o.person && target == o.target && domain_context == o.domain_context;
    }
};

struct EntityGraph {
    std::set<std::string> nodes;
    std::set<EntityEdge> edges;

    std::vector<std::string> neighbors(const std::string& person) const;

    // Node-link interchange: {"directed": true, "multigraph": false, nodes, links}.
    Json to_json(const std::vector<EntitySchema>& schemas) const;
    static EntityGraph from_json(const Json& j);
};

// Step 1. Expands seed labels into exactly target_count unique snake_case
// topics via batched provider calls, checkpointed per batch in progress_log
// when given.
DomainCorpus expand_domains(const std::vector<std::string>& seeds, size_t target_count,
                            size_t batch_size, SynthesisPort& provider,
                            ProgressLog* progress_log = nullptr);

// Step 2. Provider extraction plus deterministic sanitization: the Session
// entity is dropped, primary keys are normalized, names deduplicated, and
// deny-listed generic names rejected.
std::vector<EntitySchema> extract_entities(const DomainCorpus& corpus, SynthesisPort& provider);

// lowercase(entity_name) + "_id"; strips one trailing "_id"/"ID"/"Id" first so
// it is idempotent on already-normalized input.
std::string normalize_primary_key(const std::string& entity_name);

// Step 3. Consults the oracle per person over batches of candidate targets.
// Completed (person, batch) pairs found in progress_log are not re-queried.
EntityGraph build_entity_graph(const std::vector<EntitySchema>& entities,
                               RelationOraclePort& oracle, size_t batch_size,
                               ProgressLog* progress_log = nullptr, unsigned jobs = 1);

std::vector<Violation> validate_entity_graph(const EntityGraph& graph,
                                             const std::vector<EntitySchema>& schemas);

Json corpus_to_json(const DomainCorpus& corpus);
DomainCorpus corpus_from_json(const Json& j);

Json schemas_to_json(const std::vector<EntitySchema>& schemas);
std::vector<EntitySchema> schemas_from_json(const Json& j);

}  // namespace ontology
}  // namespace toolforge
