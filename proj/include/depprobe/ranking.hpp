#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace depprobe {

// One encoder/target pairing with its probe score and downstream score.
struct SetupRecord {
    std::string setup_id;
    std::string language;
    std::string model_id;
    double probe_score = 0.0;
    double downstream_score = 0.0;
    std::set<std::string> tags;
};

struct RankingResult {
    double rho = 0.0;
    double rho_p = 0.0;
    double tau_w = 0.0;
    double tau_p = 0.0;
    double choice_probability = 0.0;
    std::size_t n = 0;
    std::string filter_description;
};

struct Correlation {
    double coefficient = 0.0;
    double p_value = 0.0;
};

// Product-moment correlation with a two-sided t-test p-value (n-2 dof).
Correlation pearson(std::span<const double> x, std::span<const double> y);

// Weighted Kendall tau with additive hyperbolic weights 1/(r+1), ranks taken
// in decreasing order. Averages the statistic ranked by x (ties broken by y)
// and ranked by y (ties broken by x).
double weighted_tau(std::span<const double> x, std::span<const double> y);

// The same statistic with ranks taken from `ranking_key` only.
double weighted_tau_directed(std::span<const double> x, std::span<const double> y,
                             std::span<const double> ranking_key,
                             std::span<const double> tie_break);

using Statistic = std::function<double(std::span<const double>, std::span<const double>)>;

// Two-sided permutation test: share of y-shuffles with |stat| >= |observed|,
// with +1 smoothing. Iteration k shuffles with its own seeded substream.
double permutation_p(std::span<const double> x, std::span<const double> y,
                     const Statistic& statistic, std::size_t iterations = 10000,
                     std::uint64_t seed = 692);

// Tag/field filter, e.g. "tag=rembert", "language=EN-EWT", "model=google/rembert".
struct RecordFilter {
    std::vector<std::pair<std::string, std::string>> exclude;

    static RecordFilter parse(std::span<const std::string> specs);
    bool excludes(const SetupRecord& record) const;
    std::string describe() const;
};

struct RankOptions {
    std::size_t permutations = 10000;
    std::uint64_t seed = 692;
};

RankingResult rank_setups(std::span<const SetupRecord> records, const RecordFilter& filter = {},
                          const RankOptions& options = {});

// Per language, records by descending probe score (ties by model_id).
std::map<std::string, std::vector<SetupRecord>> best_per_language(
    std::span<const SetupRecord> records);

// CSV with header setup_id,language,model_id,probe_las,full_las,tags.
std::vector<SetupRecord> parse_scores_csv(std::string_view text);
std::vector<SetupRecord> read_scores_csv(const std::string& path);
std::string write_scores_csv(std::span<const SetupRecord> records);

void write_ranking_result(const RankingResult& result, std::ostream& out);

}  // namespace depprobe
