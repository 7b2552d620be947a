#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "depprobe/decoder.hpp"
#include "depprobe/probe.hpp"
#include "depprobe/treebank.hpp"

namespace depprobe {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single run
};

struct SeedScores {
    std::uint64_t seed = 0;
    double las = 0.0;
    double uuas = 0.0;
    double relacc = 0.0;
};

struct ScoreReport {
    double las = 0.0;
    double uuas = 0.0;
    double relacc = 0.0;
    std::size_t token_count = 0;
    std::size_t sentence_count = 0;
    std::uint64_t seed = 0;

    std::vector<SeedScores> per_seed;
    std::optional<MeanStd> las_stats, uuas_stats, relacc_stats;
    bool single_seed = false;
};

// Percentages in [0, 100]. Throw InputError on misaligned input or when no
// token is left to score.
double las(std::span<const PredictedTree> pred, std::span<const Sentence> gold,
           bool ignore_punct = false);
double uuas(std::span<const PredictedTree> pred, std::span<const Sentence> gold,
            bool ignore_punct = false);

// Token-level relation accuracy, argmax over all classes (ties to the lowest id).
// Tokens whose gold label is unknown to the probe (-1) count as wrong.
double relacc(const ProbeParams& params, std::span<const ProbeExample> examples);

// Decodes `examples` and scores them against `gold`.
ScoreReport evaluate(const ProbeParams& params, std::span<const ProbeExample> examples,
                     std::span<const Sentence> gold, bool ignore_punct = false,
                     DistanceMode mode = DistanceMode::L2);

// Mean and sample std over runs; the mean lands in las/uuas/relacc.
ScoreReport aggregate(std::span<const ScoreReport> runs);

// Flat key=value lines at full precision.
void write_report(const ScoreReport& report, std::ostream& out);
// Aligned table, one decimal.
void print_report_table(const ScoreReport& report, std::ostream& out);

}  // namespace depprobe
