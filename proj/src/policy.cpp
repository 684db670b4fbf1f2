#include "toolforge/policy.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace toolforge::policy {

namespace {

// --- lexer -----------------------------------------------------------------

struct Token {
    enum class Kind { ident, number, string_lit, punct, end };
    Kind kind = Kind::end;
    std::string text;
    Json value;
    int line = 1;
    int col = 1;
};

[[noreturn]] void syntax_error(const std::string& msg, int line, int col) {
    std::ostringstream ss;
    ss << "line " << line << ", col " << col << ": " << msg;
    throw UnknownPredicateSyntax(ss.str());
}

std::vector<Token> lex(const std::string& text, int base_line, int base_col) {
    std::vector<Token> out;
    int line = base_line, col = base_col;
    size_t i = 0;
    auto advance = [&](size_t n) {
        for (size_t k = 0; k < n; ++k) {
            if (i + k < text.size() && text[i + k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        i += n;
    };
    while (i < text.size()) {
        char c = text[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            advance(1);
            continue;
        }
        Token t;
        t.line = line;
        t.col = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
                ++j;
            t.kind = Token::Kind::ident;
            t.text = text.substr(i, j - i);
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '-' && i + 1 < text.size() &&
                    std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
            size_t j = i + 1;
            bool is_float = false;
            while (j < text.size()) {
                if (std::isdigit(static_cast<unsigned char>(text[j]))) {
                    ++j;
                } else if (text[j] == '.' && j + 1 < text.size() &&
                           std::isdigit(static_cast<unsigned char>(text[j + 1])) && !is_float) {
                    is_float = true;
                    j += 2;
                } else {
                    break;
                }
            }
            t.kind = Token::Kind::number;
            t.text = text.substr(i, j - i);
            t.value = is_float ? Json(std::stod(t.text)) : Json(std::stoll(t.text));
            advance(j - i);
        } else if (c == '"') {
            std::string s;
            size_t j = i + 1;
            bool closed = false;
            while (j < text.size()) {
                if (text[j] == '\\' && j + 1 < text.size()) {
                    char e = text[j + 1];
                    s.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
                    j += 2;
                } else if (text[j] == '"') {
                    closed = true;
                    ++j;
                    break;
                } else {
                    s.push_back(text[j]);
                    ++j;
                }
            }
            if (!closed) syntax_error("unterminated string literal", line, col);
            t.kind = Token::Kind::string_lit;
            t.text = text.substr(i, j - i);
            t.value = s;
            advance(j - i);
        } else {
            static const std::vector<std::string> two = {"==", "!=", "<=", ">="};
            std::string pair = text.substr(i, 2);
            if (std::find(two.begin(), two.end(), pair) != two.end()) {
                t.kind = Token::Kind::punct;
                t.text = pair;
                advance(2);
            } else if (std::strchr("()=<>,.|", c)) {
                t.kind = Token::Kind::punct;
                t.text = std::string(1, c);
                advance(1);
            } else {
                syntax_error(std::string("unexpected character '") + c + "'", line, col);
            }
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Token::Kind::end;
    end.line = line;
    end.col = col;
    out.push_back(end);
    return out;
}

// --- parser ------------------------------------------------------------------

class Parser {
public:
    Parser(const std::string& text, int base_line = 1, int base_col = 1)
        : toks_(lex(text, base_line, base_col)) {}

    ExprPtr parse_full_predicate() {
        ExprPtr e = parse_or();
        expect_end();
        return e;
    }

    ExprPtr parse_or() {
        std::vector<ExprPtr> parts{parse_and()};
        while (accept_ident("or")) parts.push_back(parse_and());
        if (parts.size() == 1) return parts[0];
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::logic_or;
        e->children = std::move(parts);
        return e;
    }

    ExprPtr parse_and() {
        std::vector<ExprPtr> parts{parse_unary()};
        while (accept_ident("and")) parts.push_back(parse_unary());
        if (parts.size() == 1) return parts[0];
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::logic_and;
        e->children = std::move(parts);
        return e;
    }

    ExprPtr parse_unary() {
        if (accept_ident("not")) {
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::logic_not;
            e->children.push_back(parse_unary());
            return e;
        }
        return parse_comparison();
    }

    ExprPtr parse_comparison() {
        ExprPtr lhs = parse_operand();
        std::string op;
        if (accept_cmp(op)) {
            ExprPtr rhs = parse_operand();
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::compare;
            e->op = op;
            e->children = {lhs, rhs};
            return e;
        }
        return lhs;
    }

    ExprPtr parse_operand() {
        const Token& t = peek();
        if (t.kind == Token::Kind::punct && t.text == "(") {
            next();
            ExprPtr inner = parse_or();
            expect_punct(")");
            return inner;
        }
        if (t.kind == Token::Kind::number || t.kind == Token::Kind::string_lit) {
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::literal;
            e->literal = t.value;
            next();
            return e;
        }
        if (t.kind == Token::Kind::ident) {
            if (t.text == "true" || t.text == "false" || t.text == "null") {
                auto e = std::make_shared<Expr>();
                e->kind = ExprKind::literal;
                e->literal = t.text == "true" ? Json(true)
                             : t.text == "false" ? Json(false)
                                                 : Json(nullptr);
                next();
                return e;
            }
            if (t.text == "now") {
                next();
                auto e = std::make_shared<Expr>();
                e->kind = ExprKind::field;
                e->path = {"now"};
                return e;
            }
            if (t.text == "exists") return parse_exists();
            if (t.text == "lookup") return parse_lookup();
            if (t.text == "session" || t.text == "param" || t.text == "db") return parse_path();
            syntax_error("unknown name '" + t.text +
                             "' (expected session/param/db/now, literal, exists or lookup)",
                         t.line, t.col);
        }
        syntax_error("expected operand, got '" + t.text + "'", t.line, t.col);
    }

    ExprPtr parse_path() {
        const Token& head = peek();
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::field;
        e->path.push_back(head.text);
        next();
        size_t want = head.text == "db" ? 2 : 1;
        for (size_t k = 0; k < want; ++k) {
            expect_punct(".");
            e->path.push_back(expect_ident());
        }
        return e;
    }

    ExprPtr parse_exists() {
        const Token& kw = peek();
        next();  // exists
        expect_punct("(");
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::exists;
        e->table = expect_ident();
        while (accept_punct(",")) {
            WhereClause w;
            w.column = expect_ident();
            if (!accept_cmp(w.op))
                syntax_error("expected comparison operator in exists() clause", peek().line,
                             peek().col);
            w.value = parse_operand();
            e->where.push_back(std::move(w));
        }
        expect_punct(")");
        (void)kw;
        return e;
    }

    ExprPtr parse_lookup() {
        next();  // lookup
        expect_punct("(");
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::lookup;
        e->table = expect_ident();
        expect_punct(",");
        e->children.push_back(parse_operand());
        expect_punct(")");
        expect_punct(".");
        e->field = expect_ident();
        return e;
    }

    // helpers shared with the clause parsers
    const Token& peek() const { return toks_[pos_]; }
    void next() { ++pos_; }
    bool at_end() const { return peek().kind == Token::Kind::end; }

    bool accept_ident(const std::string& word) {
        if (peek().kind == Token::Kind::ident && peek().text == word) {
            next();
            return true;
        }
        return false;
    }

    bool accept_punct(const std::string& p) {
        if (peek().kind == Token::Kind::punct && peek().text == p) {
            next();
            return true;
        }
        return false;
    }

    bool accept_cmp(std::string& op) {
        const Token& t = peek();
        if (t.kind != Token::Kind::punct) return false;
        if (t.text == "=" || t.text == "==" || t.text == "!=" || t.text == "<" ||
            t.text == "<=" || t.text == ">" || t.text == ">=") {
            op = t.text == "==" ? "=" : t.text;
            next();
            return true;
        }
        return false;
    }

    std::string expect_ident() {
        const Token& t = peek();
        if (t.kind != Token::Kind::ident)
            syntax_error("expected identifier, got '" + t.text + "'", t.line, t.col);
        next();
        return t.text;
    }

    void expect_punct(const std::string& p) {
        const Token& t = peek();
        if (t.kind != Token::Kind::punct || t.text != p)
            syntax_error("expected '" + p + "', got '" + t.text + "'", t.line, t.col);
        next();
    }

    void expect_end() {
        const Token& t = peek();
        if (t.kind != Token::Kind::end)
            syntax_error("unexpected trailing input '" + t.text + "'", t.line, t.col);
    }

    Json expect_literal() {
        const Token& t = peek();
        if (t.kind != Token::Kind::number && t.kind != Token::Kind::string_lit)
            syntax_error("expected literal, got '" + t.text + "'", t.line, t.col);
        next();
        return t.value;
    }

private:
    std::vector<Token> toks_;
    size_t pos_ = 0;
};

}  // namespace

ExprPtr parse_predicate(const std::string& text) {
    return Parser(text).parse_full_predicate();
}

// --- printer -----------------------------------------------------------------

namespace {

int precedence(ExprKind k) {
    switch (k) {
        case ExprKind::logic_or: return 1;
        case ExprKind::logic_and: return 2;
        case ExprKind::logic_not: return 3;
        case ExprKind::compare: return 4;
        default: return 5;
    }
}

std::string print_at(const Expr& e, int parent_prec) {
    std::string out;
    int prec = precedence(e.kind);
    switch (e.kind) {
        case ExprKind::literal:
            out = e.literal.dump();
            break;
        case ExprKind::field: {
            for (size_t i = 0; i < e.path.size(); ++i) {
                if (i) out += ".";
                out += e.path[i];
            }
            break;
        }
        case ExprKind::compare:
            out = print_at(*e.children[0], prec + 1) + " " + e.op + " " +
                  print_at(*e.children[1], prec + 1);
            break;
        case ExprKind::logic_and: {
            for (size_t i = 0; i < e.children.size(); ++i) {
                if (i) out += " and ";
                out += print_at(*e.children[i], prec);
            }
            break;
        }
        case ExprKind::logic_or: {
            for (size_t i = 0; i < e.children.size(); ++i) {
                if (i) out += " or ";
                out += print_at(*e.children[i], prec);
            }
            break;
        }
        case ExprKind::logic_not:
            out = "not " + print_at(*e.children[0], prec);
            break;
        case ExprKind::exists: {
            out = "exists(" + e.table;
            for (const auto& w : e.where)
                out += ", " + w.column + " " + w.op + " " + print_at(*w.value, 5);
            out += ")";
            break;
        }
        case ExprKind::lookup:
            out = "lookup(" + e.table + ", " + print_at(*e.children[0], 5) + ")." + e.field;
            break;
    }
    if (prec < parent_prec) return "(" + out + ")";
    return out;
}

}  // namespace

std::string print_expr(const Expr& e) { return print_at(e, 0); }

Json expr_to_json(const Expr& e) { return print_expr(e); }

// --- evaluation ----------------------------------------------------------------

const datastore::Table* EvalContext::table(const std::string& name) const {
    if (resolve_table) return resolve_table(name);
    if (!db) return nullptr;
    return db->find(name);
}

namespace {

bool is_numeric(const Json& v) { return v.is_number(); }

bool compare_values(const std::string& op, const Json& a, const Json& b) {
    if (op == "=" || op == "!=") {
        bool eq;
        if (is_numeric(a) && is_numeric(b))
            eq = a.get<double>() == b.get<double>();
        else if (a.type() == b.type())
            eq = a == b;
        else
            eq = false;
        return op == "=" ? eq : !eq;
    }
    // ordering
    int cmp;
    if (is_numeric(a) && is_numeric(b)) {
        double x = a.get<double>(), y = b.get<double>();
        cmp = x < y ? -1 : x > y ? 1 : 0;
    } else if (a.is_string() && b.is_string()) {
        const auto& x = a.get_ref<const std::string&>();
        const auto& y = b.get_ref<const std::string&>();
        cmp = x < y ? -1 : x > y ? 1 : 0;
    } else {
        throw PredicateTypeError("cannot order " + a.dump() + " and " + b.dump());
    }
    if (op == "<") return cmp < 0;
    if (op == "<=") return cmp <= 0;
    if (op == ">") return cmp > 0;
    if (op == ">=") return cmp >= 0;
    throw PredicateTypeError("unknown operator " + op);
}

Json resolve_param(const EvalContext& ctx, const std::string& name) {
    // the authorized core id always comes from the session binding
    if (!ctx.core_pk.empty() && name == ctx.core_pk &&
        ctx.session.value("authenticated", false) &&
        !ctx.session.value("authorized_core_id", Json()).is_null())
        return ctx.session.at("authorized_core_id");
    if (ctx.params.contains(name)) return ctx.params.at(name);
    throw PredicateTypeError("unbound parameter '" + name + "'");
}

Json resolve_db_field(const EvalContext& ctx, const std::string& table_name,
                      const std::string& column) {
    const datastore::Table* table = ctx.table(table_name);
    if (!table) throw PredicateTypeError("unknown table '" + table_name + "'");
    if (!table->has_column(column))
        throw PredicateTypeError("unknown column '" + table_name + "." + column + "'");
    Json key;
    try {
        key = resolve_param(ctx, table->primary_key);
    } catch (const PredicateTypeError&) {
        throw PredicateTypeError("cannot locate row for " + table_name + "." + column +
                                 ": parameter '" + table->primary_key + "' unbound");
    }
    const Json* row = table->find_row(key);
    if (!row) return nullptr;
    return row->contains(column) ? row->at(column) : Json(nullptr);
}

bool eval_bool(const Expr& e, const EvalContext& ctx) {
    Json v = eval_expr(e, ctx);
    if (!v.is_boolean())
        throw PredicateTypeError("expected boolean, got " + v.dump() + " from '" +
                                 print_expr(e) + "'");
    return v.get<bool>();
}

}  // namespace

Json eval_expr(const Expr& e, const EvalContext& ctx) {
    switch (e.kind) {
        case ExprKind::literal:
            return e.literal;
        case ExprKind::field: {
            if (e.path.size() == 1 && e.path[0] == "now") return ctx.now;
            if (e.path[0] == "session") {
                if (ctx.session.contains(e.path[1])) return ctx.session.at(e.path[1]);
                throw PredicateTypeError("unbound session field '" + e.path[1] + "'");
            }
            if (e.path[0] == "param") return resolve_param(ctx, e.path[1]);
            if (e.path[0] == "db") return resolve_db_field(ctx, e.path[1], e.path[2]);
            throw PredicateTypeError("bad field path");
        }
        case ExprKind::compare:
            return compare_values(e.op, eval_expr(*e.children[0], ctx),
                                  eval_expr(*e.children[1], ctx));
        case ExprKind::logic_and: {
            for (const auto& c : e.children)
                if (!eval_bool(*c, ctx)) return false;
            return true;
        }
        case ExprKind::logic_or: {
            for (const auto& c : e.children)
                if (eval_bool(*c, ctx)) return true;
            return false;
        }
        case ExprKind::logic_not:
            return !eval_bool(*e.children[0], ctx);
        case ExprKind::exists: {
            const datastore::Table* table = ctx.table(e.table);
            if (!table) throw PredicateTypeError("unknown table '" + e.table + "'");
            for (const auto& w : e.where)
                if (!table->has_column(w.column))
                    throw PredicateTypeError("unknown column '" + e.table + "." + w.column + "'");
            for (const auto& row : table->rows) {
                bool all = true;
                for (const auto& w : e.where) {
                    Json lhs = row.contains(w.column) ? row.at(w.column) : Json(nullptr);
                    if (!compare_values(w.op, lhs, eval_expr(*w.value, ctx))) {
                        all = false;
                        break;
                    }
                }
                if (all) return true;
            }
            return false;
        }
        case ExprKind::lookup: {
            const datastore::Table* table = ctx.table(e.table);
            if (!table) throw PredicateTypeError("unknown table '" + e.table + "'");
            if (!table->has_column(e.field))
                throw PredicateTypeError("unknown column '" + e.table + "." + e.field + "'");
            Json key = eval_expr(*e.children[0], ctx);
            const Json* row = table->find_row(key);
            if (!row) return nullptr;
            return row->contains(e.field) ? row->at(e.field) : Json(nullptr);
        }
    }
    throw PredicateTypeError("unreachable expression kind");
}

bool evaluate_predicate(const Expr& p, const EvalContext& ctx) { return eval_bool(p, ctx); }

// --- contract structural form ---------------------------------------------------

std::string ValidationRule::print() const {
    switch (kind) {
        case Kind::pattern:
            return "pattern " + Json(pattern).dump();
        case Kind::range:
            return "range " + std::to_string(lo) + ".." + std::to_string(hi);
        case Kind::one_of: {
            std::string out = "one_of ";
            for (size_t i = 0; i < allowed.size(); ++i) {
                if (i) out += " | ";
                out += Json(allowed[i]).dump();
            }
            return out;
        }
    }
    return "";
}

namespace {

Json mutation_to_json(const Mutation& m) {
    Json assigns = Json::object();
    for (const auto& a : m.assignments) assigns[a.column] = print_expr(*a.value);
    Json where = Json::object();
    for (const auto& [col, v] : m.where_eq) where[col] = print_expr(*v);
    std::string kind = m.kind == Mutation::Kind::insert   ? "insert"
                       : m.kind == Mutation::Kind::update ? "update"
                                                          : "delete";
    return {{"kind", kind}, {"table", m.table}, {"assignments", assigns}, {"where", where}};
}

Json output_to_json(const OutputSpec& o) {
    if (o.kind == OutputSpec::Kind::none) return nullptr;
    Json where = Json::object();
    for (const auto& [col, v] : o.where_eq) where[col] = print_expr(*v);
    switch (o.kind) {
        case OutputSpec::Kind::row:
            return {{"kind", "row"}, {"table", o.table}, {"where", where}};
        case OutputSpec::Kind::rows:
            return {{"kind", "rows"}, {"table", o.table}, {"where", where}};
        case OutputSpec::Kind::value:
            return {{"kind", "value"}, {"expr", print_expr(*o.value)}};
        default:
            return nullptr;
    }
}

}  // namespace

Json ToolContract::to_json() const {
    Json pre = Json::array();
    for (const auto& p : preconditions) pre.push_back(print_expr(*p));
    Json valid = Json::object();
    for (const auto& [param, rule] : input_validation) valid[param] = rule.print();
    Json perms = Json::array();
    for (const auto& r : permission_rules)
        perms.push_back({{"condition", r.condition ? Json(print_expr(*r.condition)) : Json()},
                         {"permit", r.permit},
                         {"reason", r.reason}});
    Json effects = Json::array();
    for (const auto& m : side_effects) effects.push_back(mutation_to_json(m));
    return {{"tool", tool},
            {"preconditions", pre},
            {"input_validation", valid},
            {"permission_rules", perms},
            {"side_effects", effects},
            {"output", output_to_json(output)}};
}

Json PolicyDoc::to_json() const {
    Json rules = Json::array();
    for (const auto& r : global_rules) rules.push_back(print_expr(*r));
    Json cs = Json::object();
    for (const auto& [name, c] : contracts) cs[name] = c.to_json();
    return {{"domain", domain}, {"global_rules", rules}, {"contracts", cs}};
}

// --- document parsing -------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// `<tag key="value">` -> value
std::optional<std::string> tag_attr(const std::string& line, const std::string& tag,
                                    const std::string& key) {
    std::string open = "<" + tag + " " + key + "=\"";
    if (line.rfind(open, 0) != 0) return std::nullopt;
    size_t start = open.size();
    size_t end = line.find('"', start);
    if (end == std::string::npos || line.substr(end) != "\">") return std::nullopt;
    return line.substr(start, end - start);
}

ValidationRule parse_validation_tail(Parser& p) {
    ValidationRule rule;
    if (p.accept_ident("pattern")) {
        rule.kind = ValidationRule::Kind::pattern;
        Json lit = p.expect_literal();
        if (!lit.is_string())
            throw UnknownPredicateSyntax("pattern expects a quoted string");
        rule.pattern = lit.get<std::string>();
    } else if (p.accept_ident("range")) {
        rule.kind = ValidationRule::Kind::range;
        Json lo = p.expect_literal();
        p.expect_punct(".");
        p.expect_punct(".");
        Json hi = p.expect_literal();
        if (!lo.is_number_integer() || !hi.is_number_integer())
            throw UnknownPredicateSyntax("range expects integer bounds");
        rule.lo = lo.get<int64_t>();
        rule.hi = hi.get<int64_t>();
    } else if (p.accept_ident("one_of")) {
        rule.kind = ValidationRule::Kind::one_of;
        for (;;) {
            Json lit = p.expect_literal();
            if (!lit.is_string())
                throw UnknownPredicateSyntax("one_of expects quoted strings");
            rule.allowed.push_back(lit.get<std::string>());
            if (!p.accept_punct("|")) break;
        }
    } else {
        throw UnknownPredicateSyntax("expected pattern/range/one_of");
    }
    p.expect_end();
    return rule;
}

std::vector<std::pair<std::string, ExprPtr>> parse_eq_list(Parser& p) {
    std::vector<std::pair<std::string, ExprPtr>> out;
    for (;;) {
        std::string col = p.expect_ident();
        p.expect_punct("=");
        out.emplace_back(col, p.parse_operand());
        if (!p.accept_punct(",")) break;
    }
    return out;
}

Mutation parse_effect_tail(Parser& p) {
    Mutation m;
    if (p.accept_ident("insert")) {
        m.kind = Mutation::Kind::insert;
        m.table = p.expect_ident();
        if (p.accept_ident("set")) {
            for (auto& [col, v] : parse_eq_list(p)) m.assignments.push_back({col, v});
        }
    } else if (p.accept_ident("update")) {
        m.kind = Mutation::Kind::update;
        m.table = p.expect_ident();
        if (!p.accept_ident("set")) throw UnknownPredicateSyntax("update requires set clause");
        for (auto& [col, v] : parse_eq_list(p)) m.assignments.push_back({col, v});
        if (!p.accept_ident("where")) throw UnknownPredicateSyntax("update requires where clause");
        m.where_eq = parse_eq_list(p);
    } else if (p.accept_ident("delete")) {
        m.kind = Mutation::Kind::erase;
        m.table = p.expect_ident();
        if (!p.accept_ident("where")) throw UnknownPredicateSyntax("delete requires where clause");
        m.where_eq = parse_eq_list(p);
    } else {
        throw UnknownPredicateSyntax("expected insert/update/delete");
    }
    p.expect_end();
    return m;
}

OutputSpec parse_output_tail(Parser& p) {
    OutputSpec o;
    if (p.accept_ident("row")) {
        o.kind = OutputSpec::Kind::row;
        o.table = p.expect_ident();
        if (p.accept_ident("where")) o.where_eq = parse_eq_list(p);
    } else if (p.accept_ident("rows")) {
        o.kind = OutputSpec::Kind::rows;
        o.table = p.expect_ident();
        if (p.accept_ident("where")) o.where_eq = parse_eq_list(p);
    } else if (p.accept_ident("value")) {
        o.kind = OutputSpec::Kind::value;
        o.value = p.parse_operand();
    } else {
        throw UnknownPredicateSyntax("expected row/rows/value");
    }
    p.expect_end();
    return o;
}

PermissionRule parse_rule_tail(Parser& p) {
    PermissionRule r;
    if (p.accept_ident("default")) {
        r.condition = nullptr;
    } else {
        if (!p.accept_ident("if")) throw UnknownPredicateSyntax("expected 'if' or 'default'");
        r.condition = p.parse_or();
        if (!p.accept_ident("then")) throw UnknownPredicateSyntax("expected 'then'");
    }
    if (p.accept_ident("permit")) {
        r.permit = true;
    } else if (p.accept_ident("reject")) {
        r.permit = false;
        if (p.peek().kind == Token::Kind::string_lit) r.reason = p.expect_literal();
        if (r.reason.empty()) r.reason = "not permitted";
    } else {
        throw UnknownPredicateSyntax("expected permit or reject");
    }
    p.expect_end();
    return r;
}

}  // namespace

PolicyDoc parse_policy(const std::string& text) {
    if (text.empty()) throw MalformedDelimiter("empty policy document");
    PolicyDoc doc;
    doc.source_text = text;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    enum class State { top, in_policy, in_globals, in_tool };
    State state = State::top;
    ToolContract current;
    int tool_open_line = 0;
    bool policy_closed = false;

    auto clause_parser = [&](const std::string& tail) {
        // column offset points at the tail within the original line
        return Parser(tail, line_no, 1);
    };

    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;

        if (state == State::top) {
            auto domain = tag_attr(line, "policy", "domain");
            if (!domain)
                throw MalformedDelimiter("line " + std::to_string(line_no) +
                                         ": expected <policy domain=\"...\">");
            doc.domain = *domain;
            state = State::in_policy;
            continue;
        }
        if (state == State::in_policy) {
            if (line == "</policy>") {
                policy_closed = true;
                state = State::top;
                continue;
            }
            if (line == "<global_rules>") {
                state = State::in_globals;
                continue;
            }
            if (auto name = tag_attr(line, "tool", "name")) {
                if (doc.contracts.count(*name))
                    throw DuplicateToolBlock("line " + std::to_string(line_no) +
                                             ": duplicate <tool name=\"" + *name + "\">");
                current = ToolContract{};
                current.tool = *name;
                tool_open_line = line_no;
                state = State::in_tool;
                continue;
            }
            throw MalformedDelimiter("line " + std::to_string(line_no) +
                                     ": unexpected content in <policy> body: " + line);
        }
        if (state == State::in_globals) {
            if (line == "</global_rules>") {
                state = State::in_policy;
                continue;
            }
            if (line.rfind("rule:", 0) == 0) {
                auto p = clause_parser(trim(line.substr(5)));
                doc.global_rules.push_back(p.parse_or());
                p.expect_end();
                continue;
            }
            throw MalformedDelimiter("line " + std::to_string(line_no) +
                                     ": expected rule: inside <global_rules>");
        }
        // in_tool
        if (line == "</tool>") {
            bool has_default = !current.permission_rules.empty() &&
                               current.permission_rules.back().condition == nullptr;
            if (!has_default) {
                PermissionRule def;
                def.condition = nullptr;
                def.permit = false;
                def.reason = "not permitted";  // fail closed
                current.permission_rules.push_back(def);
            }
            doc.contracts[current.tool] = current;
            state = State::in_policy;
            continue;
        }
        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw MalformedDelimiter("line " + std::to_string(line_no) +
                                     ": expected clause inside <tool>: " + line);
        std::string head = trim(line.substr(0, colon));
        std::string tail = trim(line.substr(colon + 1));
        if (head == "precondition") {
            auto p = clause_parser(tail);
            current.preconditions.push_back(p.parse_or());
            p.expect_end();
        } else if (head.rfind("validate ", 0) == 0) {
            std::string param = trim(head.substr(9));
            auto p = clause_parser(tail);
            current.input_validation.emplace_back(param, parse_validation_tail(p));
        } else if (head == "rule") {
            auto p = clause_parser(tail);
            if (!current.permission_rules.empty() &&
                current.permission_rules.back().condition == nullptr)
                throw MalformedDelimiter("line " + std::to_string(line_no) +
                                         ": rule after default rule");
            current.permission_rules.push_back(parse_rule_tail(p));
        } else if (head == "effect") {
            auto p = clause_parser(tail);
            current.side_effects.push_back(parse_effect_tail(p));
        } else if (head == "output") {
            auto p = clause_parser(tail);
            current.output = parse_output_tail(p);
        } else {
            throw MalformedDelimiter("line " + std::to_string(line_no) + ": unknown clause '" +
                                     head + "'");
        }
    }
    if (state == State::in_tool)
        throw MalformedDelimiter("line " + std::to_string(tool_open_line) +
                                 ": unclosed <tool name=\"" + current.tool + "\">");
    if (state == State::in_globals)
        throw MalformedDelimiter("unclosed <global_rules> at end of document");
    if (state == State::in_policy || !policy_closed)
        throw MalformedDelimiter("unclosed <policy> at end of document");
    return doc;
}

std::string serialize_policy(const PolicyDoc& doc) {
    std::ostringstream out;
    out << "<policy domain=\"" << doc.domain << "\">\n";
    out << "<global_rules>\n";
    for (const auto& r : doc.global_rules) out << "rule: " << print_expr(*r) << "\n";
    out << "</global_rules>\n";
    for (const auto& [name, c] : doc.contracts) {
        out << "<tool name=\"" << name << "\">\n";
        for (const auto& p : c.preconditions) out << "precondition: " << print_expr(*p) << "\n";
        for (const auto& [param, rule] : c.input_validation)
            out << "validate " << param << ": " << rule.print() << "\n";
        for (const auto& r : c.permission_rules) {
            out << "rule: ";
            if (r.condition)
                out << "if " << print_expr(*r.condition) << " then ";
            else
                out << "default ";
            if (r.permit)
                out << "permit";
            else
                out << "reject " << Json(r.reason).dump();
            out << "\n";
        }
        for (const auto& m : c.side_effects) {
            out << "effect: ";
            switch (m.kind) {
                case Mutation::Kind::insert: out << "insert " << m.table; break;
                case Mutation::Kind::update: out << "update " << m.table; break;
                case Mutation::Kind::erase: out << "delete " << m.table; break;
            }
            if (!m.assignments.empty()) {
                out << " set ";
                for (size_t i = 0; i < m.assignments.size(); ++i) {
                    if (i) out << ", ";
                    out << m.assignments[i].column << " = " << print_expr(*m.assignments[i].value);
                }
            }
            if (!m.where_eq.empty()) {
                out << " where ";
                for (size_t i = 0; i < m.where_eq.size(); ++i) {
                    if (i) out << ", ";
                    out << m.where_eq[i].first << " = " << print_expr(*m.where_eq[i].second);
                }
            }
            out << "\n";
        }
        if (c.output.kind != OutputSpec::Kind::none) {
            out << "output: ";
            if (c.output.kind == OutputSpec::Kind::value) {
                out << "value " << print_expr(*c.output.value);
            } else {
                out << (c.output.kind == OutputSpec::Kind::row ? "row " : "rows ")
                    << c.output.table;
                if (!c.output.where_eq.empty()) {
                    out << " where ";
                    for (size_t i = 0; i < c.output.where_eq.size(); ++i) {
                        if (i) out << ", ";
                        out << c.output.where_eq[i].first << " = "
                            << print_expr(*c.output.where_eq[i].second);
                    }
                }
            }
            out << "\n";
        }
        out << "</tool>\n";
    }
    out << "</policy>\n";
    return out.str();
}

// --- auditor ----------------------------------------------------------------------

namespace {

const std::vector<std::string>& wall_clock_words() {
    static const std::vector<std::string> v = {"today",        "tomorrow",    "yesterday",
                                               "current_date", "current_time", "now()"};
    return v;
}

std::string nearest_name(const std::string& bad, const std::vector<std::string>& candidates) {
    std::string best;
    size_t best_d = SIZE_MAX;
    for (const auto& c : candidates) {
        if (c == bad) continue;
        size_t d = levenshtein(bad, c);
        if (d < best_d || (d == best_d && c < best)) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

struct AuditState {
    const datastore::DatabaseSummary* summary;
    std::vector<AuditFinding>* findings;
    std::set<std::string> reported;  // dedup by search token

    std::vector<std::string> table_names() const {
        std::vector<std::string> out;
        for (const auto& [t, _] : summary->tables) out.push_back(t);
        return out;
    }

    std::vector<std::string> column_names(const std::string& table) const {
        std::vector<std::string> out;
        auto it = summary->tables.find(table);
        if (it == summary->tables.end()) return out;
        for (const auto& [c, _] : it->second) out.push_back(c);
        return out;
    }

    void flag(const std::string& kind, const std::string& msg, const Json& detail,
              const std::string& search, const std::string& replace) {
        if (!reported.insert(kind + "\x1f" + search).second) return;
        findings->push_back({{kind, msg, detail}, {search, replace}});
    }

    void check_table(const std::string& table, const std::string& where) {
        if (summary->has_table(table)) return;
        std::string fix = nearest_name(table, table_names());
        flag("FabricatedTable", "unknown table '" + table + "' in " + where,
             {{"table", table}, {"context", where}}, table, fix);
    }

    void check_column(const std::string& table, const std::string& column,
                      const std::string& where) {
        if (!summary->has_table(table)) return;  // table finding already covers it
        if (summary->has_column(table, column)) return;
        std::string fix = nearest_name(column, column_names(table));
        flag("FabricatedAttribute", "unknown column '" + table + "." + column + "' in " + where,
             {{"table", table}, {"column", column}, {"context", where}}, column, fix);
    }

    void check_literal(const Json& lit, const std::string& where) {
        if (!lit.is_string()) return;
        std::string s = to_lower(lit.get<std::string>());
        const auto& words = wall_clock_words();
        if (std::find(words.begin(), words.end(), s) != words.end())
            flag("TimelineViolation",
                 "wall-clock reference " + lit.dump() + " in " + where +
                     "; use the simulation anchor",
                 {{"literal", lit}, {"context", where}}, lit.dump(), "now");
    }

    void walk(const Expr& e, const std::string& where) {
        switch (e.kind) {
            case ExprKind::literal:
                check_literal(e.literal, where);
                break;
            case ExprKind::field:
                if (e.path[0] == "db") {
                    check_table(e.path[1], where);
                    check_column(e.path[1], e.path[2], where);
                }
                break;
            case ExprKind::exists:
                check_table(e.table, where);
                for (const auto& w : e.where) {
                    check_column(e.table, w.column, where);
                    walk(*w.value, where);
                }
                break;
            case ExprKind::lookup:
                check_table(e.table, where);
                check_column(e.table, e.field, where);
                walk(*e.children[0], where);
                break;
            default:
                for (const auto& c : e.children) walk(*c, where);
                break;
        }
    }
};

}  // namespace

std::vector<AuditFinding> audit_policy(const PolicyDoc& doc,
                                       const datastore::DatabaseSummary& summary) {
    std::vector<AuditFinding> findings;
    AuditState st{&summary, &findings, {}};

    for (const auto& r : doc.global_rules) st.walk(*r, "global rule");
    for (const auto& [tool, c] : doc.contracts) {
        for (const auto& p : c.preconditions) st.walk(*p, tool + " precondition");
        for (const auto& r : c.permission_rules)
            if (r.condition) st.walk(*r.condition, tool + " permission rule");
        for (const auto& m : c.side_effects) {
            std::string ctxname = tool + " effect";
            st.check_table(m.table, ctxname);
            for (const auto& a : m.assignments) {
                st.check_column(m.table, a.column, ctxname);
                st.walk(*a.value, ctxname);
            }
            for (const auto& [col, v] : m.where_eq) {
                st.check_column(m.table, col, ctxname);
                st.walk(*v, ctxname);
            }
        }
        if (c.output.kind == OutputSpec::Kind::row || c.output.kind == OutputSpec::Kind::rows) {
            std::string ctxname = tool + " output";
            st.check_table(c.output.table, ctxname);
            for (const auto& [col, v] : c.output.where_eq) {
                st.check_column(c.output.table, col, ctxname);
                st.walk(*v, ctxname);
            }
        } else if (c.output.kind == OutputSpec::Kind::value) {
            st.walk(*c.output.value, tool + " output");
        }
    }
    return findings;
}

std::string apply_patches(const std::string& text, const std::vector<AuditFinding>& findings) {
    std::string out = text;
    for (const auto& f : findings) {
        if (f.patch.search.empty() || f.patch.search == f.patch.replace) continue;
        size_t pos = 0;
        while ((pos = out.find(f.patch.search, pos)) != std::string::npos) {
            out.replace(pos, f.patch.search.size(), f.patch.replace);
            pos += f.patch.replace.size();
        }
    }
    return out;
}

}  // namespace toolforge::policy
