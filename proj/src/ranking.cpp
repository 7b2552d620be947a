#include "depprobe/ranking.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "depprobe/error.hpp"
#include "depprobe/rng.hpp"

namespace depprobe {

namespace {

void check_same_length(std::span<const double> x, std::span<const double> y, const char* what) {
    if (x.size() != y.size()) {
        throw InputError(std::string(what) + ": vectors differ in length (" +
                         std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
    }
}

// Fenwick tree over compressed ranks.
class CountTree {
public:
    explicit CountTree(std::size_t n) : tree_(n + 1, 0) {}

    void add(std::size_t rank) {
        for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
    }

    // Number of inserted ranks < rank.
    long long below(std::size_t rank) const {
        long long total = 0;
        for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) total += tree_[i];
        return total;
    }

private:
    std::vector<long long> tree_;
};

std::vector<std::size_t> dense_ranks(std::span<const double> v) {
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<std::size_t> ranks(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        ranks[i] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), v[i]) -
                                            sorted.begin());
    }
    return ranks;
}

// Per element i: (#concordant - #discordant) pairs involving i; pairs tied
// in either variable contribute nothing. O(n log n).
std::vector<long long> concordance_balance(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const auto ry = dense_ranks(y);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });

    std::vector<long long> balance(n, 0);
    auto sweep = [&](bool ascending) {
        CountTree tree(n);
        long long inserted = 0;
        std::size_t pos = 0;
        while (pos < n) {
            std::size_t end = pos;
            auto at = [&](std::size_t k) { return ascending ? order[k] : order[n - 1 - k]; };
            while (end < n && x[at(end)] == x[at(pos)]) ++end;
            for (std::size_t k = pos; k < end; ++k) {
                const auto i = at(k);
                const long long lower = tree.below(ry[i]);
                const long long higher = inserted - tree.below(ry[i] + 1);
                // Ascending: inserted elements have smaller x.
                balance[i] += ascending ? lower - higher : higher - lower;
            }
            for (std::size_t k = pos; k < end; ++k) {
                tree.add(ry[at(k)]);
                ++inserted;
            }
            pos = end;
        }
    };
    sweep(true);
    sweep(false);
    return balance;
}

// 0-based position of each element when sorted by decreasing key, then
// decreasing tie_break, then increasing index.
std::vector<std::size_t> decreasing_ranks(std::span<const double> key,
                                          std::span<const double> tie_break) {
    std::vector<std::size_t> order(key.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        if (key[a] != key[b]) return key[a] > key[b];
        if (tie_break[a] != tie_break[b]) return tie_break[a] > tie_break[b];
        return a < b;
    });
    std::vector<std::size_t> rank(key.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
    return rank;
}

double weighted_from_balance(const std::vector<long long>& balance,
                             const std::vector<std::size_t>& ranks) {
    // Sum over pairs of (a_i + a_j) c_ij equals sum_i a_i * balance_i, and the
    // weight total is (n - 1) * sum_i a_i.
    double numerator = 0.0;
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < balance.size(); ++i) {
        const double a = 1.0 / (static_cast<double>(ranks[i]) + 1.0);
        numerator += a * static_cast<double>(balance[i]);
        weight_sum += a;
    }
    const double denominator = static_cast<double>(balance.size() - 1) * weight_sum;
    return numerator / denominator;
}

}  // namespace

Correlation pearson(std::span<const double> x, std::span<const double> y) {
    check_same_length(x, y, "pearson");
    const std::size_t n = x.size();
    if (n < 3) throw InputError("pearson: need at least 3 points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw InputError("pearson: zero variance");
    Correlation out;
    out.coefficient = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double dof = static_cast<double>(n - 2);
    const double r2 = out.coefficient * out.coefficient;
    if (r2 >= 1.0) {
        out.p_value = 0.0;
    } else {
        const double t = std::abs(out.coefficient) * std::sqrt(dof / (1.0 - r2));
        const boost::math::students_t dist(dof);
        out.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
    }
    return out;
}

double weighted_tau_directed(std::span<const double> x, std::span<const double> y,
                             std::span<const double> ranking_key,
                             std::span<const double> tie_break) {
    check_same_length(x, y, "weighted_tau");
    check_same_length(ranking_key, tie_break, "weighted_tau");
    check_same_length(x, ranking_key, "weighted_tau");
    if (x.size() < 2) throw InputError("weighted_tau: need at least 2 points");
    return weighted_from_balance(concordance_balance(x, y), decreasing_ranks(ranking_key, tie_break));
}

double weighted_tau(std::span<const double> x, std::span<const double> y) {
    check_same_length(x, y, "weighted_tau");
    if (x.size() < 2) throw InputError("weighted_tau: need at least 2 points");
    const auto balance = concordance_balance(x, y);
    const double by_x = weighted_from_balance(balance, decreasing_ranks(x, y));
    const double by_y = weighted_from_balance(balance, decreasing_ranks(y, x));
    return (by_x + by_y) / 2.0;
}

double permutation_p(std::span<const double> x, std::span<const double> y,
                     const Statistic& statistic, std::size_t iterations, std::uint64_t seed) {
    check_same_length(x, y, "permutation_p");
    if (iterations < 100) throw InputError("permutation_p: need at least 100 iterations");
    const double observed = std::abs(statistic(x, y));
    // Guards against round-off making an identical statistic compare lower.
    const double threshold = observed - 1e-12 * std::max(1.0, observed);
    std::vector<double> shuffled(y.begin(), y.end());
    std::size_t extreme = 0;
    for (std::size_t k = 0; k < iterations; ++k) {
        std::copy(y.begin(), y.end(), shuffled.begin());
        Rng rng(substream_seed(seed, k));
        rng.shuffle(std::span<double>(shuffled));
        if (std::abs(statistic(x, shuffled)) >= threshold) ++extreme;
    }
    return static_cast<double>(extreme + 1) / static_cast<double>(iterations + 1);
}

RecordFilter RecordFilter::parse(std::span<const std::string> specs) {
    RecordFilter filter;
    for (const auto& spec : specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
            throw InputError("bad filter '" + spec + "' (expected tag=X, language=X or model=X)");
        }
        auto field = spec.substr(0, eq);
        if (field != "tag" && field != "language" && field != "model") {
            throw InputError("unknown filter field '" + field + "'");
        }
        filter.exclude.emplace_back(std::move(field), spec.substr(eq + 1));
    }
    return filter;
}

bool RecordFilter::excludes(const SetupRecord& r) const {
    for (const auto& [field, value] : exclude) {
        if (field == "tag" && r.tags.count(value) != 0) return true;
        if (field == "language" && r.language == value) return true;
        if (field == "model" && r.model_id == value) return true;
    }
    return false;
}

std::string RecordFilter::describe() const {
    if (exclude.empty()) return "all";
    std::string out = "exclude";
    for (const auto& [field, value] : exclude) out += " " + field + "=" + value;
    return out;
}

RankingResult rank_setups(std::span<const SetupRecord> records, const RecordFilter& filter,
                          const RankOptions& options) {
    std::vector<double> probe, downstream;
    for (const auto& r : records) {
        if (filter.excludes(r)) continue;
        probe.push_back(r.probe_score);
        downstream.push_back(r.downstream_score);
    }
    if (probe.size() < 3) {
        throw InputError("rank: " + std::to_string(probe.size()) +
                         " records left after filtering, need at least 3");
    }
    RankingResult result;
    result.n = probe.size();
    result.filter_description = filter.describe();
    const auto rho = pearson(probe, downstream);
    result.rho = rho.coefficient;
    result.rho_p = rho.p_value;
    result.tau_w = weighted_tau(probe, downstream);
    result.tau_p = permutation_p(
        probe, downstream, [](auto a, auto b) { return weighted_tau(a, b); }, options.permutations,
        options.seed);
    result.choice_probability = (result.tau_w + 1.0) / 2.0;
    return result;
}

std::map<std::string, std::vector<SetupRecord>> best_per_language(
    std::span<const SetupRecord> records) {
    std::map<std::string, std::vector<SetupRecord>> out;
    for (const auto& r : records) out[r.language].push_back(r);
    for (auto& [language, rows] : out) {
        std::sort(rows.begin(), rows.end(), [](const SetupRecord& a, const SetupRecord& b) {
            if (a.probe_score != b.probe_score) return a.probe_score > b.probe_score;
            return a.model_id < b.model_id;
        });
    }
    return out;
}

namespace {

constexpr std::string_view kScoresHeader = "setup_id,language,model_id,probe_las,full_las,tags";

double parse_score(std::string_view s, std::size_t line, const char* column) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) {
        throw ParseError(std::string("bad ") + column + " '" + std::string(s) + "'", line);
    }
    return value;
}

std::vector<std::string_view> split(std::string_view s, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

std::vector<SetupRecord> parse_scores_csv(std::string_view text) {
    std::vector<SetupRecord> out;
    std::set<std::string> ids;
    bool header_seen = false;
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            if (line != kScoresHeader) {
                throw ParseError("expected header '" + std::string(kScoresHeader) + "'", line_no);
            }
            header_seen = true;
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() != 6) {
            throw ParseError("expected 6 fields, found " + std::to_string(fields.size()), line_no);
        }
        SetupRecord r;
        r.setup_id = std::string(fields[0]);
        r.language = std::string(fields[1]);
        r.model_id = std::string(fields[2]);
        r.probe_score = parse_score(fields[3], line_no, "probe_las");
        r.downstream_score = parse_score(fields[4], line_no, "full_las");
        if (!fields[5].empty()) {
            for (auto tag : split(fields[5], ';')) {
                if (!tag.empty()) r.tags.insert(std::string(tag));
            }
        }
        if (!ids.insert(r.setup_id).second) {
            throw ParseError("duplicate setup_id '" + r.setup_id + "'", line_no);
        }
        out.push_back(std::move(r));
    }
    if (!header_seen) throw InputError("scores CSV: missing header");
    return out;
}

std::vector<SetupRecord> read_scores_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scores_csv(buf.str());
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

std::string write_scores_csv(std::span<const SetupRecord> records) {
    std::string out(kScoresHeader);
    out += '\n';
    char buf[64];
    for (const auto& r : records) {
        out += r.setup_id + "," + r.language + "," + r.model_id + ",";
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,", r.probe_score, r.downstream_score);
        out += buf;
        bool first = true;
        for (const auto& tag : r.tags) {
            if (!first) out += ';';
            out += tag;
            first = false;
        }
        out += '\n';
    }
    return out;
}

void write_ranking_result(const RankingResult& result, std::ostream& out) {
    char buf[128];
    auto kv = [&](const char* key, double value) {
        std::snprintf(buf, sizeof buf, "%s=%.17g\n", key, value);
        out << buf;
    };
    kv("rho", result.rho);
    kv("rho_p", result.rho_p);
    kv("tau_w", result.tau_w);
    kv("tau_p", result.tau_p);
    kv("choice_probability", result.choice_probability);
    out << "n=" << result.n << "\n";
    out << "filter=" << result.filter_description << "\n";
}

}  // namespace depprobe
