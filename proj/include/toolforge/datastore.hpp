#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "toolforge/blueprint.hpp"
#include "toolforge/common.hpp"
#include "toolforge/ontology.hpp"

namespace toolforge::datastore {

TOOLFORGE_ERROR(UnsatisfiableRange);
TOOLFORGE_ERROR(UnsatisfiableConstraints);
TOOLFORGE_ERROR(CorruptSnapshot);
TOOLFORGE_ERROR(EntitySchemaConflict);

struct Table {
    std::string name;
    std::string primary_key;
    std::string kind = "entity";  // "entity" | "relationship"
    std::string source_server;    // provenance, set by fusion
    std::vector<std::pair<std::string, std::string>> columns;  // name -> value_type, ordered
    std::vector<Json> rows;

    const std::string* column_type(const std::string& col) const;
    bool has_column(const std::string& col) const;
    const Json* find_row(const Json& pk_value) const;
    Json* find_row(const Json& pk_value);

    Json to_json() const;
    static Table from_json(const Json& j);
};

struct Database {
    std::map<std::string, Table> tables;

    Table* find(const std::string& name);
    const Table* find(const std::string& name) const;

    Json to_json() const;
    static Database from_json(const Json& j);
};

// Content-addressed, immutable capture of a full database.
class Snapshot {
public:
    Snapshot() = default;
    Snapshot(std::string address, std::shared_ptr<const std::string> bytes)
        : address_(std::move(address)), bytes_(std::move(bytes)) {}

    const std::string& address() const { return address_; }
    const std::string& bytes() const { return *bytes_; }
    bool empty() const { return bytes_ == nullptr; }

private:
    std::string address_;
    std::shared_ptr<const std::string> bytes_;
};

Snapshot snapshot(const Database& db);
Database restore(const Snapshot& snap);           // throws CorruptSnapshot
void restore(Database& db, const Snapshot& snap); // replaces db wholesale

struct ColumnSummary {
    std::string value_type;
    Json min;  // null when not an ordered type or table empty
    Json max;
    std::vector<std::pair<Json, size_t>> categories;  // distinct value -> frequency
    double null_rate = 0.0;
};

struct DatabaseSummary {
    // table -> column -> summary
    std::map<std::string, std::map<std::string, ColumnSummary>> tables;
    std::map<std::string, size_t> row_counts;

    bool has_table(const std::string& t) const { return tables.count(t) > 0; }
    bool has_column(const std::string& t, const std::string& c) const;

    Json to_json() const;
    static DatabaseSummary from_json(const Json& j);
};

struct ConstraintRule {
    enum class Kind { semantic_match, temporal_order };
    Kind kind = Kind::semantic_match;
    std::string lhs_table, lhs_column;
    std::string rhs_table, rhs_column;
    std::string relation = "=";  // "=", "<", "<="

    Json to_json() const;
    static ConstraintRule from_json(const Json& j);
};

// Step 6 phase 1: one table per entity, `counts` rows each, values drawn from
// seeded per-type generators honoring AttributeSpec ranges/categories.
Database generate_entities(const blueprint::Blueprint& bp,
                           const std::map<std::string, ontology::EntitySchema>& catalog,
                           uint64_t seed, const std::map<std::string, size_t>& counts);

DatabaseSummary summarize(const Database& db);

// Step 6 phase 2: relationship rows satisfying every constraint; candidates
// are pre-indexed by constraint key, so each draw is a weighted O(1) pick —
// no rejection loops. The weighting reproduces uniform sampling over valid
// pairs exactly.
Database populate_relationships(Database db, const blueprint::Blueprint& bp,
                                const std::vector<ConstraintRule>& constraints,
                                const std::map<std::string, size_t>& counts, uint64_t seed);

struct FusionReport {
    std::vector<Json> pk_collisions;  // same entity pk, different content
    Json to_json() const;
};

// Step 12: entity tables unioned by primary key, relationship tables renamed
// `<Server>_<R>`. Throws EntitySchemaConflict when one entity name comes with
// two different column sets.
Database fuse_databases(const std::map<std::string, Database>& dbs,
                        const std::string& combo_name, FusionReport* report = nullptr);

// On-disk layout: <dir>/<Table>.json, one file per table.
void save_database(const std::filesystem::path& outputs_dir, const Database& db);
Database load_database(const std::filesystem::path& outputs_dir);

}  // namespace toolforge::datastore
