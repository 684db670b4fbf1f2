#include "toolforge/datastore.hpp"

#include <algorithm>
#include <cstring>

namespace toolforge::datastore {

namespace {

const std::vector<std::string>& first_names() {
    static const std::vector<std::string> v = {
        "Avery", "Blake",  "Casey", "Drew",  "Ellis", "Finley", "Harper", "Indira", "Jordan",
        "Kai",   "Logan",  "Mika",  "Noor",  "Owen",  "Priya",  "Quinn",  "Rowan",  "Sage",
        "Tariq", "Uma",    "Vera",  "Wes",   "Xena",  "Yuki",   "Zane"};
    return v;
}

const std::vector<std::string>& last_names() {
    static const std::vector<std::string> v = {
        "Adams", "Brooks",   "Chen",  "Diaz",  "Evans", "Flores", "Garcia", "Hughes", "Ito",
        "Jones", "Khan",     "Lopez", "Meyer", "Okafor", "Ortiz", "Patel",  "Rossi",  "Silva",
        "Tran",  "Ueda",     "Vargas", "Wolfe", "Xu",    "Young", "Zhang"};
    return v;
}

const std::vector<std::string>& nouns() {
    static const std::vector<std::string> v = {
        "alpha",  "beacon", "cedar",  "delta",  "ember",  "falcon", "garnet", "harbor", "iris",
        "juniper", "keel",  "lumen",  "maple",  "nectar", "onyx",   "pearl",  "quartz", "ridge",
        "summit", "thistle", "umber", "violet", "willow", "xenon",  "yarrow", "zephyr"};
    return v;
}

constexpr const char* kDefaultWindowStart = "2024-06-01T00:00:00";
constexpr const char* kDefaultWindowEnd = "2025-06-01T00:00:00";

bool parse_int_range(const std::string& r, int64_t& lo, int64_t& hi) {
    auto pos = r.find("..");
    if (pos == std::string::npos) return false;
    try {
        lo = std::stoll(r.substr(0, pos));
        hi = std::stoll(r.substr(pos + 2));
    } catch (...) {
        return false;
    }
    return true;
}

bool parse_ts_range(const std::string& r, int64_t& lo, int64_t& hi) {
    auto pos = r.find("..");
    if (pos == std::string::npos) return false;
    std::string a = r.substr(0, pos), b = r.substr(pos + 2);
    if (!looks_like_timestamp(a) || !looks_like_timestamp(b)) return false;
    lo = parse_timestamp(a);
    hi = parse_timestamp(b);
    return true;
}

std::vector<std::string> parse_choices(const std::string& r) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : r) {
        if (c == '|') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Json gen_string(const std::string& attr_name, Rng& rng) {
    std::string lower = to_lower(attr_name);
    if (lower.find("name") != std::string::npos)
        return rng.pick(first_names()) + " " + rng.pick(last_names());
    if (lower.find("email") != std::string::npos)
        return to_lower(rng.pick(first_names())) + "." + to_lower(rng.pick(last_names())) +
               "@example.com";
    return rng.pick(nouns()) + " " + rng.pick(nouns());
}

Json gen_typed_value(ontology::ValueType type, const std::string& attr_name,
                     const std::vector<std::string>& categories, const std::string& range,
                     Rng& rng) {
    using ontology::ValueType;
    switch (type) {
        case ValueType::enum_: {
            std::vector<std::string> cats = categories;
            if (cats.empty()) cats = parse_choices(range);
            if (cats.empty())
                throw UnsatisfiableRange("enum attribute " + attr_name + " has no categories");
            return rng.pick(cats);
        }
        case ValueType::boolean:
            return rng.coin();
        case ValueType::integer: {
            int64_t lo = 0, hi = 100;
            if (!range.empty() && !parse_int_range(range, lo, hi))
                throw UnsatisfiableRange("bad integer range: " + range);
            if (hi < lo) throw UnsatisfiableRange("empty integer range: " + range);
            return rng.range(lo, hi);
        }
        case ValueType::number: {
            int64_t lo = 0, hi = 1000;
            if (!range.empty() && !parse_int_range(range, lo, hi))
                throw UnsatisfiableRange("bad number range: " + range);
            if (hi < lo) throw UnsatisfiableRange("empty number range: " + range);
            // two decimal places, kept exact by integer math
            return static_cast<double>(rng.range(lo * 100, hi * 100)) / 100.0;
        }
        case ValueType::timestamp: {
            int64_t lo = parse_timestamp(kDefaultWindowStart);
            int64_t hi = parse_timestamp(kDefaultWindowEnd);
            if (!range.empty() && !parse_ts_range(range, lo, hi))
                throw UnsatisfiableRange("bad timestamp range: " + range);
            if (hi < lo) throw UnsatisfiableRange("empty timestamp range: " + range);
            return format_timestamp(rng.range(lo, hi));
        }
        case ValueType::identifier: {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%05llu",
                          static_cast<unsigned long long>(rng.below(100000)));
            return to_lower(attr_name) + "_" + buf;
        }
        case ValueType::string_:
            return gen_string(attr_name, rng);
    }
    return nullptr;
}

ontology::ValueType rel_value_type(const std::string& t) {
    if (t == "str" || t == "string") return ontology::ValueType::string_;
    if (t == "int" || t == "integer") return ontology::ValueType::integer;
    if (t == "float" || t == "number" || t == "double") return ontology::ValueType::number;
    if (t == "bool" || t == "boolean") return ontology::ValueType::boolean;
    if (t == "timestamp") return ontology::ValueType::timestamp;
    if (t == "identifier") return ontology::ValueType::identifier;
    if (t == "enum") return ontology::ValueType::enum_;
    return ontology::ValueType::string_;
}

std::string pk_value(const std::string& entity, size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", index);
    return to_lower(entity) + "_" + buf;
}

bool is_ordered_type(const std::string& t) {
    return t == "integer" || t == "number" || t == "timestamp";
}

}  // namespace

const std::string* Table::column_type(const std::string& col) const {
    for (const auto& [name, type] : columns)
        if (name == col) return &type;
    return nullptr;
}

bool Table::has_column(const std::string& col) const { return column_type(col) != nullptr; }

const Json* Table::find_row(const Json& pk) const {
    for (const auto& r : rows)
        if (r.contains(primary_key) && r.at(primary_key) == pk) return &r;
    return nullptr;
}

Json* Table::find_row(const Json& pk) {
    for (auto& r : rows)
        if (r.contains(primary_key) && r.at(primary_key) == pk) return &r;
    return nullptr;
}

Json Table::to_json() const {
    Json cols = Json::array();
    for (const auto& [n, t] : columns) cols.push_back({n, t});
    return {{"name", name},
            {"primary_key", primary_key},
            {"kind", kind},
            {"source_server", source_server},
            {"columns", cols},
            {"rows", rows}};
}

Table Table::from_json(const Json& j) {
    Table t;
    t.name = j.at("name");
    t.primary_key = j.at("primary_key");
    t.kind = j.value("kind", "entity");
    t.source_server = j.value("source_server", "");
    for (const auto& c : j.at("columns")) t.columns.emplace_back(c.at(0), c.at(1));
    for (const auto& r : j.at("rows")) t.rows.push_back(r);
    return t;
}

Table* Database::find(const std::string& name) {
    auto it = tables.find(name);
    return it == tables.end() ? nullptr : &it->second;
}

const Table* Database::find(const std::string& name) const {
    auto it = tables.find(name);
    return it == tables.end() ? nullptr : &it->second;
}

Json Database::to_json() const {
    Json out = Json::object();
    for (const auto& [name, t] : tables) out[name] = t.to_json();
    return out;
}

Database Database::from_json(const Json& j) {
    Database db;
    for (const auto& [name, t] : j.items()) db.tables[name] = Table::from_json(t);
    return db;
}

Snapshot snapshot(const Database& db) {
    auto bytes = std::make_shared<std::string>(canonical_dump(db.to_json()));
    std::string addr = sha256_hex(*bytes);
    return Snapshot(addr, std::move(bytes));
}

Database restore(const Snapshot& snap) {
    if (snap.empty()) throw CorruptSnapshot("empty snapshot");
    if (sha256_hex(snap.bytes()) != snap.address())
        throw CorruptSnapshot("content does not match address " + snap.address());
    Json j;
    try {
        j = Json::parse(snap.bytes());
    } catch (const std::exception& e) {
        throw CorruptSnapshot(e.what());
    }
    return Database::from_json(j);
}

void restore(Database& db, const Snapshot& snap) { db = restore(snap); }

bool DatabaseSummary::has_column(const std::string& t, const std::string& c) const {
    auto it = tables.find(t);
    return it != tables.end() && it->second.count(c) > 0;
}

Json DatabaseSummary::to_json() const {
    Json tj = Json::object();
    for (const auto& [tname, cols] : tables) {
        Json cj = Json::object();
        for (const auto& [cname, s] : cols) {
            Json cats = Json::array();
            for (const auto& [v, n] : s.categories) cats.push_back({{"value", v}, {"count", n}});
            cj[cname] = {{"value_type", s.value_type},
                         {"min", s.min},
                         {"max", s.max},
                         {"categories", cats},
                         {"null_rate", s.null_rate}};
        }
        tj[tname] = {{"columns", cj}, {"row_count", row_counts.at(tname)}};
    }
    return tj;
}

DatabaseSummary DatabaseSummary::from_json(const Json& j) {
    DatabaseSummary out;
    for (const auto& [tname, tj] : j.items()) {
        out.row_counts[tname] = tj.at("row_count").get<size_t>();
        for (const auto& [cname, cj] : tj.at("columns").items()) {
            ColumnSummary s;
            s.value_type = cj.at("value_type");
            s.min = cj.at("min");
            s.max = cj.at("max");
            s.null_rate = cj.at("null_rate");
            for (const auto& cat : cj.at("categories"))
                s.categories.emplace_back(cat.at("value"), cat.at("count").get<size_t>());
            out.tables[tname][cname] = std::move(s);
        }
    }
    return out;
}

Json ConstraintRule::to_json() const {
    return {{"kind", kind == Kind::semantic_match ? "semantic_match" : "temporal_order"},
            {"lhs", {lhs_table, lhs_column}},
            {"rhs", {rhs_table, rhs_column}},
            {"relation", relation}};
}

ConstraintRule ConstraintRule::from_json(const Json& j) {
    ConstraintRule r;
    r.kind = j.at("kind") == "semantic_match" ? Kind::semantic_match : Kind::temporal_order;
    r.lhs_table = j.at("lhs").at(0);
    r.lhs_column = j.at("lhs").at(1);
    r.rhs_table = j.at("rhs").at(0);
    r.rhs_column = j.at("rhs").at(1);
    r.relation = j.at("relation");
    return r;
}

Database generate_entities(const blueprint::Blueprint& bp,
                           const std::map<std::string, ontology::EntitySchema>& catalog,
                           uint64_t seed, const std::map<std::string, size_t>& counts) {
    Database db;
    for (const auto& entity : bp.entity_names()) {
        auto it = catalog.find(entity);
        if (it == catalog.end()) throw Error("UnknownEntity", entity);
        const auto& schema = it->second;
        size_t n = counts.count(entity) ? counts.at(entity) : 10;
        if (n < 1) throw Error("BadCount", "count must be >= 1 for " + entity);

        Table t;
        t.name = entity;
        t.primary_key = schema.primary_key;
        t.kind = "entity";
        t.columns.emplace_back(schema.primary_key, "identifier");
        for (const auto& [aname, attr] : schema.attributes) {
            if (aname == schema.primary_key) continue;
            t.columns.emplace_back(aname,
                                   ontology::value_type_name(attr.value_type) == "enum"
                                       ? "string"
                                       : ontology::value_type_name(attr.value_type));
        }

        Rng rng(derive_seed(seed, "entities/" + entity));
        for (size_t i = 1; i <= n; ++i) {
            Json row = Json::object();
            row[schema.primary_key] = pk_value(entity, i);
            for (const auto& [aname, attr] : schema.attributes) {
                if (aname == schema.primary_key) continue;
                row[aname] =
                    gen_typed_value(attr.value_type, aname, attr.categories, attr.range, rng);
            }
            t.rows.push_back(std::move(row));
        }
        db.tables[entity] = std::move(t);
    }
    return db;
}

DatabaseSummary summarize(const Database& db) {
    DatabaseSummary out;
    for (const auto& [tname, table] : db.tables) {
        out.row_counts[tname] = table.rows.size();
        for (const auto& [cname, ctype] : table.columns) {
            ColumnSummary s;
            s.value_type = ctype;
            size_t nulls = 0;
            std::map<std::string, std::pair<Json, size_t>> cats;
            for (const auto& row : table.rows) {
                if (!row.contains(cname) || row.at(cname).is_null()) {
                    ++nulls;
                    continue;
                }
                const Json& v = row.at(cname);
                if (is_ordered_type(ctype)) {
                    if (s.min.is_null() || v < s.min) s.min = v;
                    if (s.max.is_null() || v > s.max) s.max = v;
                } else {
                    auto key = v.dump();
                    auto it = cats.find(key);
                    if (it == cats.end())
                        cats[key] = {v, 1};
                    else
                        ++it->second.second;
                }
            }
            for (const auto& [k, vc] : cats) s.categories.push_back(vc);
            s.null_rate = table.rows.empty()
                              ? 0.0
                              : static_cast<double>(nulls) / static_cast<double>(table.rows.size());
            out.tables[tname][cname] = std::move(s);
        }
    }
    return out;
}

namespace {

// Index of table rows grouped by one column's value.
std::map<std::string, std::vector<size_t>> build_index(const Table& t, const std::string& col) {
    std::map<std::string, std::vector<size_t>> index;
    for (size_t i = 0; i < t.rows.size(); ++i)
        if (t.rows[i].contains(col)) index[t.rows[i].at(col).dump()].push_back(i);
    return index;
}

}  // namespace

Database populate_relationships(Database db, const blueprint::Blueprint& bp,
                                const std::vector<ConstraintRule>& constraints,
                                const std::map<std::string, size_t>& counts, uint64_t seed) {
    for (const auto& rel : bp.relationships) {
        size_t m = counts.count(rel.name) ? counts.at(rel.name) : 8;
        std::string own_pk = ontology::normalize_primary_key(rel.name);

        // participating entities via foreign keys, core first
        std::vector<std::pair<std::string, std::string>> fks;  // attr -> entity
        for (const auto& [attr, spec] : rel.attributes) {
            if (spec.value_from_entity.empty()) continue;
            if (attr == ontology::normalize_primary_key(spec.value_from_entity))
                fks.emplace_back(attr, spec.value_from_entity);
        }
        std::stable_sort(fks.begin(), fks.end(), [&](const auto& a, const auto& b) {
            bool ca = a.second == bp.core_entity, cb = b.second == bp.core_entity;
            if (ca != cb) return ca;
            return a.second < b.second;
        });
        for (const auto& [attr, entity] : fks) {
            const Table* t = db.find(entity);
            if (!t || t->rows.empty())
                throw UnsatisfiableConstraints("entity table empty or missing: " + entity);
        }

        // pairing constraints between two participating entities
        const ConstraintRule* pair_rule = nullptr;
        auto participating = [&](const std::string& table) {
            for (const auto& [attr, entity] : fks)
                if (entity == table) return true;
            return false;
        };
        for (const auto& c : constraints) {
            if (c.kind != ConstraintRule::Kind::semantic_match) continue;
            if (c.lhs_table != rel.name && c.rhs_table != rel.name &&
                participating(c.lhs_table) && participating(c.rhs_table)) {
                pair_rule = &c;
                break;
            }
        }

        Table table;
        table.name = rel.name;
        table.primary_key = own_pk;
        table.kind = "relationship";
        table.columns.emplace_back(own_pk, "identifier");
        for (const auto& [attr, spec] : rel.attributes) {
            if (attr == own_pk) continue;
            auto vt = rel_value_type(spec.value_type);
            table.columns.emplace_back(
                attr, vt == ontology::ValueType::enum_ ? "string" : ontology::value_type_name(vt));
        }

        Rng rng(derive_seed(seed, "relationships/" + rel.name));

        // pre-index the paired entity for O(1) valid-pair draws
        std::map<std::string, std::vector<size_t>> pair_index;
        std::vector<uint64_t> lhs_weights;
        if (pair_rule) {
            const Table& lhs_t = *db.find(pair_rule->lhs_table);
            const Table& rhs_t = *db.find(pair_rule->rhs_table);
            pair_index = build_index(rhs_t, pair_rule->rhs_column);
            uint64_t total = 0;
            for (const auto& row : lhs_t.rows) {
                auto it = pair_index.find(row.contains(pair_rule->lhs_column)
                                              ? row.at(pair_rule->lhs_column).dump()
                                              : "null");
                uint64_t w = it == pair_index.end() ? 0 : it->second.size();
                lhs_weights.push_back(w);
                total += w;
            }
            if (total == 0)
                throw UnsatisfiableConstraints(
                    "no valid pair for " + pair_rule->lhs_table + "." + pair_rule->lhs_column +
                    " = " + pair_rule->rhs_table + "." + pair_rule->rhs_column);
        }

        for (size_t i = 1; i <= m; ++i) {
            // choose one row per participating entity
            std::map<std::string, const Json*> chosen;
            if (pair_rule) {
                const Table& lhs_t = *db.find(pair_rule->lhs_table);
                const Table& rhs_t = *db.find(pair_rule->rhs_table);
                size_t li = rng.weighted(lhs_weights);
                const auto& cands =
                    pair_index.at(lhs_t.rows[li].at(pair_rule->lhs_column).dump());
                size_t ri = cands[rng.below(cands.size())];
                chosen[pair_rule->lhs_table] = &lhs_t.rows[li];
                chosen[pair_rule->rhs_table] = &rhs_t.rows[ri];
            }
            for (const auto& [attr, entity] : fks) {
                if (chosen.count(entity)) continue;
                const Table& t = *db.find(entity);
                chosen[entity] = &t.rows[rng.below(t.rows.size())];
            }

            Json row = Json::object();
            row[own_pk] = pk_value(rel.name, i);
            // foreign keys and copied columns
            for (const auto& [attr, spec] : rel.attributes) {
                if (attr == own_pk || spec.value_from_entity.empty()) continue;
                const Json* src = chosen.count(spec.value_from_entity)
                                      ? chosen.at(spec.value_from_entity)
                                      : nullptr;
                if (!src) continue;
                std::string src_col =
                    attr == ontology::normalize_primary_key(spec.value_from_entity)
                        ? db.find(spec.value_from_entity)->primary_key
                        : attr;
                if (src->contains(src_col)) row[attr] = src->at(src_col);
            }
            // semantic_match rules copying an entity column into this relationship
            for (const auto& c : constraints) {
                if (c.kind != ConstraintRule::Kind::semantic_match) continue;
                if (c.lhs_table == rel.name && chosen.count(c.rhs_table)) {
                    const Json* src = chosen.at(c.rhs_table);
                    if (src->contains(c.rhs_column)) row[c.lhs_column] = src->at(c.rhs_column);
                } else if (c.rhs_table == rel.name && chosen.count(c.lhs_table)) {
                    const Json* src = chosen.at(c.lhs_table);
                    if (src->contains(c.lhs_column)) row[c.rhs_column] = src->at(c.lhs_column);
                }
            }
            // remaining columns
            for (const auto& [attr, spec] : rel.attributes) {
                if (attr == own_pk || row.contains(attr)) continue;
                auto vt = rel_value_type(spec.value_type);
                row[attr] = gen_typed_value(vt, attr, parse_choices(spec.range), spec.range, rng);
            }
            // temporal ordering within this row (and against chosen entity rows)
            for (const auto& c : constraints) {
                if (c.kind != ConstraintRule::Kind::temporal_order) continue;
                if (c.rhs_table != rel.name) continue;
                Json lo;
                if (c.lhs_table == rel.name && row.contains(c.lhs_column))
                    lo = row.at(c.lhs_column);
                else if (chosen.count(c.lhs_table) && chosen.at(c.lhs_table)->contains(c.lhs_column))
                    lo = chosen.at(c.lhs_table)->at(c.lhs_column);
                if (lo.is_null() || !row.contains(c.rhs_column)) continue;
                if (lo.is_string()) {
                    int64_t base = parse_timestamp(lo.get<std::string>());
                    int64_t delta = rng.range(c.relation == "=" ? 0 : 1, 30 * 24 * 3600);
                    row[c.rhs_column] = format_timestamp(base + delta);
                } else if (lo.is_number()) {
                    row[c.rhs_column] = lo.get<double>() + static_cast<double>(rng.range(1, 100));
                }
            }
            table.rows.push_back(std::move(row));
        }
        db.tables[rel.name] = std::move(table);
    }
    return db;
}

Json FusionReport::to_json() const { return {{"pk_collisions", pk_collisions}}; }

Database fuse_databases(const std::map<std::string, Database>& dbs,
                        const std::string& combo_name, FusionReport* report) {
    if (dbs.size() < 2) throw Error("BadFusion", "fuse_databases needs at least 2 inputs");
    (void)combo_name;
    Database out;
    for (const auto& [server, db] : dbs) {
        for (const auto& [tname, table] : db.tables) {
            if (table.kind == "relationship") {
                Table renamed = table;
                renamed.name = server + "_" + tname;
                renamed.source_server = server;
                out.tables[renamed.name] = std::move(renamed);
                continue;
            }
            auto it = out.tables.find(tname);
            if (it == out.tables.end()) {
                Table copy = table;
                copy.source_server = server;
                out.tables[tname] = std::move(copy);
                continue;
            }
            Table& existing = it->second;
            if (existing.columns != table.columns)
                throw EntitySchemaConflict("entity " + tname +
                                           " has different columns across servers");
            existing.source_server = "";  // shared after union
            for (const auto& row : table.rows) {
                const Json* prev = existing.find_row(row.at(existing.primary_key));
                if (!prev) {
                    existing.rows.push_back(row);
                } else if (*prev != row && report) {
                    report->pk_collisions.push_back({{"table", tname},
                                                     {"pk", row.at(existing.primary_key)},
                                                     {"server", server}});
                }
            }
        }
    }
    return out;
}

void save_database(const std::filesystem::path& outputs_dir, const Database& db) {
    std::filesystem::create_directories(outputs_dir);
    for (const auto& [name, table] : db.tables)
        save_json(outputs_dir / (name + ".json"), table.to_json());
}

Database load_database(const std::filesystem::path& outputs_dir) {
    Database db;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(outputs_dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        Table t = Table::from_json(load_json(f));
        db.tables[t.name] = std::move(t);
    }
    return db;
}

}  // namespace toolforge::datastore
