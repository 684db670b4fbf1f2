#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "toolforge/common.hpp"
#include "toolforge/datastore.hpp"

namespace toolforge::policy {

TOOLFORGE_ERROR(MalformedDelimiter);
TOOLFORGE_ERROR(UnknownPredicateSyntax);
TOOLFORGE_ERROR(DuplicateToolBlock);
TOOLFORGE_ERROR(PredicateTypeError);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind {
    literal,      // Json scalar
    field,        // session.X | param.Y | db.Table.column | now
    compare,      // children[0] op children[1]
    logic_and,    // children...
    logic_or,     // children...
    logic_not,    // children[0]
    exists,       // exists(Table, col op value, ...)
    lookup,       // lookup(Table, key).field
};

struct WhereClause {
    std::string column;
    std::string op;  // "=", "!=", "<", "<=", ">", ">="
    ExprPtr value;
};

struct Expr {
    ExprKind kind = ExprKind::literal;
    Json literal;
    std::vector<std::string> path;  // field
    std::string op;                 // compare
    std::vector<ExprPtr> children;
    std::string table;  // exists / lookup
    std::vector<WhereClause> where;  // exists
    std::string field;  // lookup
};

// Parses a single predicate; errors carry line/col (offsets are relative to
// the string unless a base line is supplied by the document parser).
ExprPtr parse_predicate(const std::string& text);

// Canonical text form; parse(print(e)) is structurally identical to e.
std::string print_expr(const Expr& e);
Json expr_to_json(const Expr& e);

// Evaluation context. `now` is always the simulation anchor, never the wall
// clock. `resolve_table` lets a fused runtime alias relationship tables
// without rewriting contracts.
struct EvalContext {
    const datastore::Database* db = nullptr;
    Json session = Json::object();  // {"authenticated": bool, "authorized_core_id": ...}
    Json params = Json::object();
    std::string now;
    std::string core_table;
    std::string core_pk;
    std::function<const datastore::Table*(const std::string&)> resolve_table;

    const datastore::Table* table(const std::string& name) const;
};

Json eval_expr(const Expr& e, const EvalContext& ctx);
bool evaluate_predicate(const Expr& p, const EvalContext& ctx);

// --- tool contracts --------------------------------------------------------

struct ValidationRule {
    enum class Kind { pattern, range, one_of };
    Kind kind = Kind::pattern;
    std::string pattern;  // ECMAScript regex, full match
    int64_t lo = 0, hi = 0;
    std::vector<std::string> allowed;

    std::string print() const;
};

struct PermissionRule {
    ExprPtr condition;  // null => default rule
    bool permit = false;
    std::string reason;  // REJECT only
};

struct Assignment {
    std::string column;
    ExprPtr value;
};

struct Mutation {
    enum class Kind { insert, update, erase };
    Kind kind = Kind::insert;
    std::string table;
    std::vector<Assignment> assignments;                      // insert/update
    std::vector<std::pair<std::string, ExprPtr>> where_eq;    // update/erase
};

struct OutputSpec {
    enum class Kind { none, row, rows, value };
    Kind kind = Kind::none;
    std::string table;
    std::vector<std::pair<std::string, ExprPtr>> where_eq;
    ExprPtr value;
};

struct ToolContract {
    std::string tool;
    std::vector<ExprPtr> preconditions;
    std::vector<std::pair<std::string, ValidationRule>> input_validation;
    std::vector<PermissionRule> permission_rules;  // ordered; last must be default
    std::vector<Mutation> side_effects;
    OutputSpec output;

    Json to_json() const;  // structural form, used for diffs and round-trips
};

struct PolicyDoc {
    std::string domain;
    std::vector<ExprPtr> global_rules;
    std::map<std::string, ToolContract> contracts;
    std::string source_text;

    Json to_json() const;
};

// Document format: <policy domain="...">, <global_rules>, <tool name="...">
// blocks; line-oriented clauses inside. See docs/policy_dsl.md.
PolicyDoc parse_policy(const std::string& text);
std::string serialize_policy(const PolicyDoc& doc);

// --- auditor ----------------------------------------------------------------

struct SearchReplace {
    std::string search;
    std::string replace;
};

struct AuditFinding {
    Violation violation;  // FabricatedTable | FabricatedAttribute | TimelineViolation
    SearchReplace patch;
};

std::vector<AuditFinding> audit_policy(const PolicyDoc& doc,
                                       const datastore::DatabaseSummary& summary);

std::string apply_patches(const std::string& text, const std::vector<AuditFinding>& findings);

}  // namespace toolforge::policy
