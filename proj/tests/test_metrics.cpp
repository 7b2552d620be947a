#include <doctest.h>

#include <sstream>

#include "depprobe/error.hpp"
#include "depprobe/metrics.hpp"
#include "depprobe/rng.hpp"

using namespace depprobe;

namespace {

PredictedTree from_gold(const Sentence& s) {
    PredictedTree t;
    t.root_index = s.root_index();
    for (const auto& tok : s.tokens) {
        t.heads.push_back(tok.head);
        t.labels.push_back(tok.deprel);
    }
    return t;
}

Sentence random_sentence(Rng& rng, int n) {
    Sentence s;
    s.sent_id = "r";
    for (int i = 1; i <= n; ++i) {
        const int head = i == 1 ? 0 : 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(i - 1)));
        s.tokens.push_back({i, "w", rng.below(4) == 0 ? "PUNCT" : "NOUN", head,
                            head == 0 ? "root" : (rng.below(2) ? "a" : "b")});
    }
    return s;
}

}  // namespace

TEST_CASE("perfect prediction scores 100") {
    Rng rng(1);
    std::vector<Sentence> gold;
    std::vector<PredictedTree> pred;
    for (int k = 0; k < 10; ++k) {
        gold.push_back(random_sentence(rng, 2 + k));
        pred.push_back(from_gold(gold.back()));
    }
    CHECK(las(pred, gold) == 100.0);
    CHECK(uuas(pred, gold) == 100.0);
    CHECK(las(pred, gold, true) == 100.0);
}

TEST_CASE("LAS: one wrong label of four is 75") {
    const Sentence gold{"s", {{1, "a", "X", 2, "a"}, {2, "b", "X", 0, "root"}, {3, "c", "X", 2, "b"}, {4, "d", "X", 3, "a"}}};
    auto pred = from_gold(gold);
    pred.labels[3] = "b";
    CHECK(las(std::span(&pred, 1), std::span(&gold, 1)) == 75.0);
}

TEST_CASE("UUAS: star predicted for a chain is 50") {
    const Sentence chain{"c", {{1, "a", "X", 0, "root"}, {2, "b", "X", 1, "a"}, {3, "c", "X", 2, "a"}}};
    const PredictedTree star{1, {0, 1, 1}, {"root", "a", "a"}};
    CHECK(uuas(std::span(&star, 1), std::span(&chain, 1)) == 50.0);
}

TEST_CASE("controlled corruption of 10% of heads gives LAS 90") {
    Rng rng(2);
    std::vector<Sentence> gold;
    std::vector<PredictedTree> pred;
    std::size_t tokens = 0;
    while (tokens < 100) {
        gold.push_back(random_sentence(rng, 10));
        tokens += 10;
    }
    std::size_t corrupted = 0;
    for (const auto& s : gold) {
        auto t = from_gold(s);
        // Re-attach the last token to a different head; one per sentence = 10%.
        const int n = static_cast<int>(s.size());
        const int old = t.heads[static_cast<std::size_t>(n - 1)];
        t.heads[static_cast<std::size_t>(n - 1)] = old == 1 ? 2 : 1;
        ++corrupted;
        pred.push_back(t);
    }
    CHECK(corrupted == 10);
    CHECK(las(pred, gold) == doctest::Approx(90.0));
    // Every corrupted non-root token loses exactly its own gold edge.
    CHECK(uuas(pred, gold) == doctest::Approx(100.0 * (90.0 - 10.0) / 90.0));
}

TEST_CASE("ignore_punct drops punctuation from both sides") {
    const Sentence gold{"p", {{1, "a", "NOUN", 0, "root"}, {2, ",", "PUNCT", 1, "punct"}, {3, "b", "NOUN", 1, "a"}}};
    PredictedTree pred = from_gold(gold);
    pred.heads[1] = 3;
    pred.labels[1] = "a";
    CHECK(las(std::span(&pred, 1), std::span(&gold, 1)) == doctest::Approx(200.0 / 3.0));
    CHECK(las(std::span(&pred, 1), std::span(&gold, 1), true) == 100.0);
    CHECK(uuas(std::span(&pred, 1), std::span(&gold, 1)) == 50.0);
    CHECK(uuas(std::span(&pred, 1), std::span(&gold, 1), true) == 100.0);
}

TEST_CASE("misalignment names the sentence") {
    const Sentence gold{"the-id", {{1, "a", "X", 0, "root"}, {2, "b", "X", 1, "a"}}};
    const PredictedTree short_pred{1, {0}, {"root"}};
    try {
        las(std::span(&short_pred, 1), std::span(&gold, 1));
        FAIL("expected error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("the-id") != std::string::npos);
    }
}

TEST_CASE("metric properties on random corruptions") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto gold = random_sentence(rng, 2 + static_cast<int>(rng.below(10)));
        auto pred = from_gold(gold);
        const auto n = gold.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (gold.tokens[i].head == 0) continue;
            if (rng.below(3) == 0) pred.labels[i] = pred.labels[i] == "a" ? "b" : "a";
            if (rng.below(3) == 0) {
                int h;
                do {
                    h = 1 + static_cast<int>(rng.below(n));
                } while (h == static_cast<int>(i) + 1);
                pred.heads[i] = h;
            }
        }
        const double l = las(std::span(&pred, 1), std::span(&gold, 1));
        const double u = uuas(std::span(&pred, 1), std::span(&gold, 1));
        CHECK(l >= 0.0);
        CHECK(l <= 100.0);
        CHECK(u >= 0.0);
        CHECK(u <= 100.0);
        // Non-root LAS hits each imply a gold edge hit.
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (gold.tokens[i].head != 0 && pred.heads[i] == gold.tokens[i].head &&
                pred.labels[i] == gold.tokens[i].deprel) {
                ++hits;
            }
        }
        CHECK(100.0 * static_cast<double>(hits) / static_cast<double>(n - 1) <= u + 1e-9);
        // Fixing one token never lowers LAS.
        const auto k = static_cast<std::size_t>(rng.below(n));
        auto fixed = pred;
        fixed.heads[k] = gold.tokens[k].head;
        fixed.labels[k] = gold.tokens[k].deprel;
        CHECK(las(std::span(&fixed, 1), std::span(&gold, 1)) >= l);
    }
}

TEST_CASE("relacc against a per-token loop") {
    Rng rng(4);
    ProbeParams p;
    p.structural = Eigen::MatrixXd::Zero(1, 3);
    p.relational = Eigen::MatrixXd::Random(4, 3);
    p.inventory = LabelInventory({"a", "b", "c", "root"});
    std::vector<ProbeExample> ex;
    std::size_t hits = 0, total = 0;
    for (int s = 0; s < 10; ++s) {
        ProbeExample e;
        const auto n = 1 + static_cast<Eigen::Index>(rng.below(6));
        e.layers = {Eigen::MatrixXd::Random(n, 3)};
        e.tree_distances = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int gold = static_cast<int>(rng.below(5)) - 1;
            e.labels.push_back(gold);
            int best = 0;
            double best_v = -1e300;
            for (int c = 0; c < 4; ++c) {
                const double v = p.relational.row(c).dot(e.layers[0].row(i));
                if (v > best_v) {
                    best_v = v;
                    best = c;
                }
            }
            ++total;
            if (best == gold) ++hits;
        }
        ex.push_back(e);
    }
    CHECK(relacc(p, ex) == doctest::Approx(100.0 * static_cast<double>(hits) / static_cast<double>(total)));

    // Uniform logits pick class 0.
    p.relational.setZero();
    std::size_t zeros = 0;
    total = 0;
    for (const auto& e : ex) {
        for (int g : e.labels) {
            ++total;
            if (g == 0) ++zeros;
        }
    }
    CHECK(relacc(p, ex) == doctest::Approx(100.0 * static_cast<double>(zeros) / static_cast<double>(total)));
}

TEST_CASE("aggregate mean and sample std") {
    auto runs = [](std::initializer_list<double> values) {
        std::vector<ScoreReport> out;
        std::uint64_t seed = 1;
        for (double v : values) {
            ScoreReport r;
            r.las = r.uuas = r.relacc = v;
            r.seed = seed++;
            out.push_back(r);
        }
        return out;
    };
    const auto a = aggregate(runs({54.2, 54.8, 55.4}));
    CHECK(a.las == doctest::Approx(54.8));
    CHECK(a.las_stats->std == doctest::Approx(0.6));
    CHECK(a.per_seed.size() == 3);
    CHECK_FALSE(a.single_seed);

    const auto flat = aggregate(runs({54.8, 54.8, 54.8}));
    CHECK(flat.las_stats->std == doctest::Approx(0.0));

    const auto one = aggregate(runs({61.0}));
    CHECK(one.single_seed);
    CHECK(one.las_stats->std == 0.0);

    std::ostringstream table;
    print_report_table(a, table);
    CHECK(table.str().find("54.8 ± 0.6") != std::string::npos);
    std::ostringstream kv;
    write_report(a, kv);
    CHECK(kv.str().find("runs=3\n") != std::string::npos);
    CHECK(kv.str().find("seed.2.las=54.799999999999997\n") != std::string::npos);
}
