#include "depprobe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "depprobe/error.hpp"

namespace depprobe {

namespace {

bool is_punct(const Token& t) { return t.upos == "PUNCT"; }

void check_aligned(std::span<const PredictedTree> pred, std::span<const Sentence> gold) {
    if (pred.size() != gold.size()) {
        throw InputError("scoring: " + std::to_string(pred.size()) + " predictions for " +
                         std::to_string(gold.size()) + " gold sentences");
    }
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (pred[i].size() != gold[i].size()) {
            throw InputError("scoring: sentence '" + gold[i].sent_id + "' has " +
                             std::to_string(gold[i].size()) + " gold tokens but " +
                             std::to_string(pred[i].size()) + " predicted");
        }
    }
}

double percent(std::size_t hits, std::size_t total, const char* metric) {
    if (total == 0) throw InputError(std::string(metric) + ": nothing to score");
    return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    for (double v : values) out.mean += v;
    out.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

}  // namespace

double las(std::span<const PredictedTree> pred, std::span<const Sentence> gold, bool ignore_punct) {
    check_aligned(pred, gold);
    std::size_t hits = 0;
    std::size_t total = 0;
    for (std::size_t s = 0; s < gold.size(); ++s) {
        for (std::size_t i = 0; i < gold[s].size(); ++i) {
            const auto& t = gold[s].tokens[i];
            if (ignore_punct && is_punct(t)) continue;
            ++total;
            if (pred[s].heads[i] == t.head && pred[s].labels[i] == t.deprel) ++hits;
        }
    }
    return percent(hits, total, "LAS");
}

double uuas(std::span<const PredictedTree> pred, std::span<const Sentence> gold, bool ignore_punct) {
    check_aligned(pred, gold);
    std::size_t hits = 0;
    std::size_t total = 0;
    for (std::size_t s = 0; s < gold.size(); ++s) {
        const auto& sent = gold[s];
        auto excluded = [&](int index) {
            return ignore_punct && is_punct(sent.tokens[static_cast<std::size_t>(index - 1)]);
        };
        std::set<Edge> gold_edges;
        for (const auto& t : sent.tokens) {
            if (t.head == 0 || excluded(t.index) || excluded(t.head)) continue;
            gold_edges.insert(make_edge(t.index, t.head));
        }
        total += gold_edges.size();
        for (std::size_t i = 0; i < sent.size(); ++i) {
            const int head = pred[s].heads[i];
            if (head == 0) continue;
            if (gold_edges.count(make_edge(static_cast<int>(i) + 1, head)) != 0) ++hits;
        }
    }
    return percent(hits, total, "UUAS");
}

double relacc(const ProbeParams& params, std::span<const ProbeExample> examples) {
    std::size_t hits = 0;
    std::size_t total = 0;
    for (const auto& ex : examples) {
        const auto logits = relational_logits(params, representation(params, ex));
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            Eigen::Index best = 0;
            for (Eigen::Index c = 1; c < logits.cols(); ++c) {
                if (logits(i, c) > logits(i, best)) best = c;
            }
            ++total;
            if (ex.labels[static_cast<std::size_t>(i)] == static_cast<int>(best)) ++hits;
        }
    }
    return percent(hits, total, "RelAcc");
}

ScoreReport evaluate(const ProbeParams& params, std::span<const ProbeExample> examples,
                     std::span<const Sentence> gold, bool ignore_punct, DistanceMode mode) {
    if (examples.size() != gold.size()) throw InputError("evaluate: example/sentence count mismatch");
    std::vector<PredictedTree> pred;
    pred.reserve(examples.size());
    ScoreReport report;
    for (const auto& ex : examples) {
        pred.push_back(decode(params, representation(params, ex), mode));
        report.token_count += ex.size();
    }
    report.sentence_count = gold.size();
    report.las = las(pred, gold, ignore_punct);
    report.uuas = uuas(pred, gold, ignore_punct);
    report.relacc = relacc(params, examples);
    return report;
}

ScoreReport aggregate(std::span<const ScoreReport> runs) {
    if (runs.empty()) throw InputError("aggregate: no runs");
    ScoreReport out;
    out.token_count = runs.front().token_count;
    out.sentence_count = runs.front().sentence_count;
    std::vector<double> l, u, r;
    for (const auto& run : runs) {
        out.per_seed.push_back({run.seed, run.las, run.uuas, run.relacc});
        l.push_back(run.las);
        u.push_back(run.uuas);
        r.push_back(run.relacc);
    }
    out.las_stats = mean_std(l);
    out.uuas_stats = mean_std(u);
    out.relacc_stats = mean_std(r);
    out.las = out.las_stats->mean;
    out.uuas = out.uuas_stats->mean;
    out.relacc = out.relacc_stats->mean;
    out.single_seed = runs.size() == 1;
    return out;
}

void write_report(const ScoreReport& report, std::ostream& out) {
    char buf[128];
    auto kv = [&](const char* key, double value) {
        std::snprintf(buf, sizeof buf, "%s=%.17g\n", key, value);
        out << buf;
    };
    kv("las", report.las);
    kv("uuas", report.uuas);
    kv("relacc", report.relacc);
    if (report.las_stats) {
        kv("las_std", report.las_stats->std);
        kv("uuas_std", report.uuas_stats->std);
        kv("relacc_std", report.relacc_stats->std);
    }
    out << "token_count=" << report.token_count << "\n";
    out << "sentence_count=" << report.sentence_count << "\n";
    if (!report.per_seed.empty()) {
        out << "runs=" << report.per_seed.size() << "\n";
        out << "single_seed=" << (report.single_seed ? 1 : 0) << "\n";
    }
    for (const auto& s : report.per_seed) {
        std::snprintf(buf, sizeof buf, "seed.%llu.", static_cast<unsigned long long>(s.seed));
        const std::string prefix = buf;
        kv((prefix + "las").c_str(), s.las);
        kv((prefix + "uuas").c_str(), s.uuas);
        kv((prefix + "relacc").c_str(), s.relacc);
    }
}

void print_report_table(const ScoreReport& report, std::ostream& out) {
    char buf[160];
    auto row = [&](const char* name, double value, const std::optional<MeanStd>& stats) {
        if (stats) {
            std::snprintf(buf, sizeof buf, "%-8s %6.1f ± %.1f\n", name, value, stats->std);
        } else {
            std::snprintf(buf, sizeof buf, "%-8s %6.1f\n", name, value);
        }
        out << buf;
    };
    row("LAS", report.las, report.las_stats);
    row("UUAS", report.uuas, report.uuas_stats);
    row("RelAcc", report.relacc, report.relacc_stats);
    out << report.sentence_count << " sentences, " << report.token_count << " tokens";
    if (!report.per_seed.empty()) {
        out << ", " << report.per_seed.size() << (report.single_seed ? " run (single_seed)" : " runs");
    }
    out << "\n";
}

}  // namespace depprobe
