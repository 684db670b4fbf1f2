#pragma once

#include "toolforge/ports.hpp"

namespace toolforge::stubs {

// Deterministic synthesis provider: a small grammar plus seeded draws. Every
// method is a pure function of (construction seed, inputs), so interrupted
// and resumed pipelines produce byte-identical artifacts.
class StubSynthesis : public SynthesisPort {
public:
    explicit StubSynthesis(uint64_t seed) : seed_(seed) {}

    std::vector<ontology::DomainTopic> propose_domains(const std::vector<std::string>& seeds,
                                                       const std::vector<std::string>& existing,
                                                       size_t batch_size) override;
    std::vector<ontology::EntitySchema> propose_entities(
        const ontology::DomainCorpus& corpus) override;
    Json draft_blueprint(const Json& outline, const Json& entity_definitions,
                         const std::vector<Violation>& feedback) override;
    Json propose_constraints(const Json& blueprint, const Json& summary) override;
    std::string draft_policy(const Json& blueprint, const Json& summary) override;
    Json tool_graph_hint(const Json& tool_docs, const std::string& policy_text) override;
    Json propose_domain_pairs(const Json& domains_info) override;
    Json propose_trajectory_fusions(const Json& request) override;
    std::vector<std::string> propose_bridge_rules(const Json& request) override;
    Json draft_template(const Json& request) override;
    Json draft_startup(const Json& request) override;

private:
    uint64_t seed_;
};

// Relation inference sharing the synthesis stub's entity world: a person
// operates on a target when they co-occur in one of the built-in domain
// families, plus a low-probability seeded extra edge.
class StubOracle : public RelationOraclePort {
public:
    explicit StubOracle(uint64_t seed) : seed_(seed) {}

    std::vector<Relation> relate(const ontology::EntitySchema& person,
                                 const std::vector<ontology::EntitySchema>& batch) override;

private:
    uint64_t seed_;
};

// Structural template scoring: placeholder coverage, tool mention coverage,
// length bounds. Rollout judging returns no tags.
class StubJudge : public JudgePort {
public:
    std::array<int, 5> score_template(const Json& request) override;
    std::vector<std::string> judge_rollout(const Json& rollout) override;
};

// Applies the first machine-applicable patch found in the failure report;
// classifies by violation kind.
class StubFixer : public FixerPort {
public:
    Diagnosis diagnose(const Json& failure) override;
};

// Shared with the oracle and pipeline: the built-in entity families.
struct Family {
    std::string name;
    std::vector<std::string> keywords;
    std::vector<std::pair<std::string, bool>> entities;  // name -> is_person, primary first
};

const std::vector<Family>& families();
const Family* family_for_topic(const std::string& topic_label);

std::string humanize(const std::string& identifier);  // underscores -> spaces

}  // namespace toolforge::stubs
