#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace toolforge {

using Json = nlohmann::json;

// Base class for every typed error in the engine. `kind` is a stable
// machine-readable tag that the CLI surfaces as structured JSON on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

#define TOOLFORGE_ERROR(Name)                                              \
    class Name : public ::toolforge::Error {                              \
    public:                                                                \
        explicit Name(const std::string& msg) : Error(#Name, msg) {}       \
    }

// Validation findings are data, not exceptions.
struct Violation {
    std::string kind;
    std::string message;
    Json detail = Json::object();

    bool operator==(const Violation& o) const {
        return kind == o.kind && message == o.message && detail == o.detail;
    }
};

Json violations_to_json(const std::vector<Violation>& vs);

// --- hashing ------------------------------------------------------------

std::string sha256_hex(std::string_view bytes);

// Canonical serialization: nlohmann::json objects keep keys sorted, so a
// plain dump is already byte-stable. Indent 1 keeps artifacts diffable.
std::string canonical_dump(const Json& j);
std::string hash_json(const Json& j);

// 64-bit seed derived from a base seed and a label, for per-step streams.
uint64_t derive_seed(uint64_t base, std::string_view label);

// --- deterministic RNG ----------------------------------------------------

// mt19937_64 output is pinned by the standard; the distributions are not,
// so every bounded draw here is hand-rolled.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, n). Rejection sampling, unbiased.
    uint64_t below(uint64_t n);

    // Uniform in [lo, hi] inclusive.
    int64_t range(int64_t lo, int64_t hi);

    // Uniform double in [0, 1).
    double unit();

    bool coin(double p = 0.5) { return unit() < p; }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        if (v.empty()) throw Error("EmptyPick", "pick from empty vector");
        return v[below(v.size())];
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Index draw with probability proportional to weights[i].
    size_t weighted(const std::vector<uint64_t>& weights);

private:
    std::mt19937_64 eng_;
};

// --- identifiers ----------------------------------------------------------

bool is_snake_case(std::string_view s);           // [a-z][a-z0-9]*(_[a-z0-9]+)*
bool is_snake_case_label(std::string_view s);     // 1..3 terms

bool is_identifier(std::string_view s);           // [A-Za-z_][A-Za-z0-9_]*
bool is_upper_camel(std::string_view s);

std::string to_lower(std::string_view s);

// Edit distance, used by the policy auditor to suggest patches.
size_t levenshtein(std::string_view a, std::string_view b);

// --- time -----------------------------------------------------------------

// Timestamps are ISO-8601 "YYYY-MM-DDTHH:MM:SS" strings throughout; the
// lexicographic order of that format is chronological, which the predicate
// evaluator relies on.
bool looks_like_timestamp(std::string_view s);
int64_t parse_timestamp(const std::string& iso);  // seconds since epoch, UTC
std::string format_timestamp(int64_t epoch_seconds);

// --- filesystem -----------------------------------------------------------

std::string read_file(const std::filesystem::path& p);
void atomic_write_file(const std::filesystem::path& p, std::string_view content);
void save_json(const std::filesystem::path& p, const Json& j);
Json load_json(const std::filesystem::path& p);

std::vector<Json> read_jsonl(const std::filesystem::path& p);

// Append-only JSONL log with serialized, flushed appends. Safe to share
// across threads.
class ProgressLog {
public:
    explicit ProgressLog(std::filesystem::path path) : path_(std::move(path)) {}

    void append(const Json& record);
    std::vector<Json> entries() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
};

// Runs fn(i) for i in [0, n) on `jobs` threads. Exceptions propagate.
void parallel_for(size_t n, unsigned jobs, const std::function<void(size_t)>& fn);

}  // namespace toolforge
