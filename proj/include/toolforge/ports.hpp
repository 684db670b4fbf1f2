#pragma once

#include <array>

#include "toolforge/common.hpp"
#include "toolforge/ontology.hpp"

namespace toolforge {

// Provider boundary for every generation step. Implementations must be
// deterministic given their construction seed; the shipped stub is (LLM
// adapters live behind the same interface). Blueprint/policy outputs are
// raw wire payloads on purpose — parsing and validation happen on this
// side of the port, never inside it.
class SynthesisPort {
public:
    virtual ~SynthesisPort() = default;

    // Step 1: one batch of candidate domain topics.
    virtual std::vector<ontology::DomainTopic> propose_domains(
        const std::vector<std::string>& seeds, const std::vector<std::string>& existing,
        size_t batch_size) = 0;

    // Step 2: one-shot extraction over the whole corpus.
    virtual std::vector<ontology::EntitySchema> propose_entities(
        const ontology::DomainCorpus& corpus) = 0;

    // Step 4: draft (or refine, when feedback is non-empty) a blueprint.
    // Returns the wire-schema JSON object.
    virtual Json draft_blueprint(const Json& outline, const Json& entity_definitions,
                                 const std::vector<Violation>& feedback) = 0;

    // Step 6: constraint rules [{kind, lhs:[table,col], rhs:[table,col], relation}].
    virtual Json propose_constraints(const Json& blueprint, const Json& summary) = 0;

    // Step 7: full policy document text in the delimited format.
    virtual std::string draft_policy(const Json& blueprint, const Json& summary) = 0;

    // Step 9: optional node-link JSON hint; null when the provider has none.
    virtual Json tool_graph_hint(const Json& tool_docs, const std::string& policy_text) = 0;

    // Step 11: [{domain_a, domain_b, motivation}].
    virtual Json propose_domain_pairs(const Json& domains_info) = 0;
    // Step 11: [{tau_a: hash, tau_b: hash, motivation}].
    virtual Json propose_trajectory_fusions(const Json& request) = 0;

    // Step 13: bridge rules in the predicate DSL.
    virtual std::vector<std::string> propose_bridge_rules(const Json& request) = 0;

    // Step 14: {text, slots: [[scope, attr], ...]}.
    virtual Json draft_template(const Json& request) = 0;

    // Step 17: {startup_query, omitted_slots: [[scope, attr], ...]}.
    virtual Json draft_startup(const Json& request) = 0;
};

// Step 3 relation inference: which targets in the batch does this person
// semantically operate on, and in which domain context.
class RelationOraclePort {
public:
    virtual ~RelationOraclePort() = default;

    struct Relation {
        std::string target;
        std::string domain_context;
    };

    virtual std::vector<Relation> relate(const ontology::EntitySchema& person,
                                         const std::vector<ontology::EntitySchema>& batch) = 0;
};

// Template judging (step 14) and optional subjective rollout judging (H1-H5).
class JudgePort {
public:
    virtual ~JudgePort() = default;

    // clarity, coherence, completeness, naturalness, specificity — each 1..5.
    virtual std::array<int, 5> score_template(const Json& request) = 0;

    // H-tags for a rollout; empty means clean.
    virtual std::vector<std::string> judge_rollout(const Json& rollout) = 0;
};

// The agent under test (or a deterministic replay/mutant of it).
struct AgentAction {
    enum class Kind { tool_call, respond, halt };
    Kind kind = Kind::respond;
    std::string tool;
    Json args;
    std::string text;
};

class AgentPort {
public:
    virtual ~AgentPort() = default;
    virtual void begin(const Json& task, const Json& tool_docs) = 0;
    // history: array of {actor, content} turn records, newest last
    virtual AgentAction act(const Json& history) = 0;
};

class UserSimPort {
public:
    virtual ~UserSimPort() = default;

    struct Reply {
        std::string text;
        bool stop = false;
        Json metadata = Json::object();
    };

    virtual std::string opening() = 0;
    virtual Reply reply(const std::string& assistant_text) = 0;
};

// Diagnoses a failed produce->test iteration and proposes a text patch.
class FixerPort {
public:
    virtual ~FixerPort() = default;

    struct Diagnosis {
        std::string category;  // "function" | "unit test" | "test data"
        std::string search;
        std::string replace;
        std::string explanation;
    };

    virtual Diagnosis diagnose(const Json& failure) = 0;
};

}  // namespace toolforge
