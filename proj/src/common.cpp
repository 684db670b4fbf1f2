#include "toolforge/common.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace toolforge {

Json violations_to_json(const std::vector<Violation>& vs) {
    Json arr = Json::array();
    for (const auto& v : vs)
        arr.push_back({{"kind", v.kind}, {"message", v.message}, {"detail", v.detail}});
    return arr;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string canonical_dump(const Json& j) { return j.dump(1); }

std::string hash_json(const Json& j) { return sha256_hex(canonical_dump(j)); }

uint64_t derive_seed(uint64_t base, std::string_view label) {
    std::string key = std::to_string(base) + "/" + std::string(label);
    std::string h = sha256_hex(key);
    uint64_t v = 0;
    for (int i = 0; i < 16; ++i) {
        char c = h[i];
        v = (v << 4) | static_cast<uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
    }
    return v;
}

uint64_t Rng::below(uint64_t n) {
    if (n == 0) throw Error("EmptyPick", "below(0)");
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
        v = eng_();
    } while (v >= limit);
    return v % n;
}

int64_t Rng::range(int64_t lo, int64_t hi) {
    if (hi < lo) throw Error("BadRange", "range hi < lo");
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo) + 1));
}

double Rng::unit() { return (eng_() >> 11) * 0x1.0p-53; }

size_t Rng::weighted(const std::vector<uint64_t>& weights) {
    uint64_t total = 0;
    for (uint64_t w : weights) total += w;
    if (total == 0) throw Error("EmptyPick", "weighted with all-zero weights");
    uint64_t t = below(total);
    uint64_t acc = 0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (t < acc) return i;
    }
    return weights.size() - 1;
}

bool is_snake_case(std::string_view s) {
    if (s.empty() || s[0] < 'a' || s[0] > 'z') return false;
    bool prev_us = false;
    for (size_t i = 1; i < s.size(); ++i) {
        char c = s[i];
        if (c == '_') {
            if (prev_us) return false;
            prev_us = true;
        } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            prev_us = false;
        } else {
            return false;
        }
    }
    return !prev_us;
}

bool is_snake_case_label(std::string_view s) {
    if (!is_snake_case(s)) return false;
    size_t terms = 1;
    for (char c : s)
        if (c == '_') ++terms;
    return terms <= 3;
}

bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

bool is_upper_camel(std::string_view s) {
    if (s.empty() || s[0] < 'A' || s[0] > 'Z') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c))) return false;
    return true;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<size_t> row(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        size_t diag = row[0];
        row[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t next = std::min({row[j] + 1, row[j - 1] + 1,
                                    diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = row[j];
            row[j] = next;
        }
    }
    return row[b.size()];
}

bool looks_like_timestamp(std::string_view s) {
    if (s.size() < 19) return false;
    static const char* pat = "dddd-dd-ddTdd:dd:dd";
    for (size_t i = 0; i < 19; ++i) {
        char p = pat[i];
        char c = s[i];
        if (p == 'd') {
            if (!std::isdigit(static_cast<unsigned char>(c))) return false;
        } else if (c != p) {
            return false;
        }
    }
    return true;
}

int64_t parse_timestamp(const std::string& iso) {
    std::tm tm{};
    int y, mo, d, h, mi, se;
    if (std::sscanf(iso.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &se) != 6)
        throw Error("BadTimestamp", "cannot parse: " + iso);
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = se;
    return static_cast<int64_t>(timegm(&tm));
}

std::string format_timestamp(int64_t epoch_seconds) {
    std::time_t t = static_cast<std::time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[80];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw Error("FileNotFound", p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void atomic_write_file(const std::filesystem::path& p, std::string_view content) {
    std::filesystem::create_directories(p.parent_path());
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("WriteFailed", tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) throw Error("WriteFailed", tmp.string());
    }
    std::filesystem::rename(tmp, p);
}

void save_json(const std::filesystem::path& p, const Json& j) {
    atomic_write_file(p, canonical_dump(j) + "\n");
}

Json load_json(const std::filesystem::path& p) {
    return Json::parse(read_file(p));
}

std::vector<Json> read_jsonl(const std::filesystem::path& p) {
    std::vector<Json> out;
    if (!std::filesystem::exists(p)) return out;
    std::ifstream f(p);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(Json::parse(line));
    }
    return out;
}

void ProgressLog::append(const Json& record) {
    std::lock_guard<std::mutex> lock(mu_);
    std::filesystem::create_directories(path_.parent_path());
    std::ofstream f(path_, std::ios::app);
    if (!f) throw Error("WriteFailed", path_.string());
    f << record.dump() << "\n";
    f.flush();
}

std::vector<Json> ProgressLog::entries() const {
    std::lock_guard<std::mutex> lock(mu_);
    return read_jsonl(path_);
}

void parallel_for(size_t n, unsigned jobs, const std::function<void(size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    unsigned count = std::min<unsigned>(jobs, static_cast<unsigned>(n));
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace toolforge
