#pragma once

#include <map>
#include <string>
#include <vector>

#include "toolforge/common.hpp"
#include "toolforge/ontology.hpp"

namespace toolforge {

class SynthesisPort;

namespace blueprint {

TOOLFORGE_ERROR(IsolatedPerson);
TOOLFORGE_ERROR(FeedbackBudgetExhausted);
TOOLFORGE_ERROR(UnknownValueType);

struct RelAttribute {
    std::string value_type;         // str/int/float/bool/timestamp/identifier/enum
    std::string value_from_entity;  // entity name when this column is a foreign key / copy
    std::string range;              // free-form: "1..5", "a|b|c", ...
};

struct RelationshipSchema {
    std::string name;
    std::string description;
    // ordered: attribute name -> spec
    std::vector<std::pair<std::string, RelAttribute>> attributes;

    const RelAttribute* find(const std::string& attr) const;
};

struct ToolParam {
    std::string description;
    std::string value_type;
    std::string range;
    bool free_text = false;  // non-deterministic field, ignored by fuzzy matching
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<std::pair<std::string, ToolParam>> parameters;
    bool mutating = false;
    bool requires_confirmation = false;
    std::string role;  // "authorize" for the single auth gate, else empty
    std::vector<std::string> legal_accessor;
};

struct Blueprint {
    std::string server_name;
    std::string description;
    std::string core_entity;
    std::vector<std::string> peripheral_entities;
    std::vector<RelationshipSchema> relationships;
    std::vector<ToolSpec> functions;

    const ToolSpec* find_tool(const std::string& name) const;
    std::vector<std::string> entity_names() const;  // core + peripherals

    // Wire schema mirrors the generation-prompt output: MCP_server_name,
    // description, core_entity, peripheral_entities, relationships, functions.
    Json to_json() const;
    static Blueprint from_json(const Json& j);
};

struct Outline {
    std::string name;
    std::string core;
    std::vector<std::string> peripherals;

    Json to_json() const;
};

struct BlueprintConfig {
    size_t min_functions = 8;
    size_t max_relationships = 2;
    size_t max_rounds = 3;
    const std::map<std::string, ontology::EntitySchema>* catalog = nullptr;
};

// JSON-Schema tool doc with the strict all-params-required policy applied.
struct ToolSchemaDoc {
    std::string name;
    std::string description;
    Json parameters;  // {"type":"object","properties":{...},"required":[...]}
    std::vector<std::string> required;

    Json to_json() const;
    static ToolSchemaDoc from_json(const Json& j);
};

std::vector<Outline> sample_outlines(const ontology::EntityGraph& graph,
                                     const std::string& person, size_t count,
                                     size_t max_peripherals, uint64_t seed);

Blueprint synthesize_blueprint(const Outline& outline,
                               const std::map<std::string, ontology::EntitySchema>& catalog,
                               SynthesisPort& provider, const BlueprintConfig& config);

std::vector<Violation> validate_blueprint(const Blueprint& bp, const BlueprintConfig& config);

std::vector<ToolSchemaDoc> standardize_tools(const Blueprint& bp);

// One artifact per server.
Json tool_docs_to_json(const std::string& server, const std::vector<ToolSchemaDoc>& docs);
std::vector<ToolSchemaDoc> tool_docs_from_json(const Json& j);

// "str" -> "string", "int" -> "integer", ... Throws UnknownValueType.
std::string coerce_json_type(const std::string& internal_type);

}  // namespace blueprint
}  // namespace toolforge
