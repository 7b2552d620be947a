#include "depprobe/synthetic.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <functional>
#include <numeric>

#include "depprobe/error.hpp"
#include "depprobe/rng.hpp"

namespace depprobe {

namespace {

constexpr const char* kRelationNames[] = {"acl",   "advcl", "advmod", "amod", "aux",   "case",
                                          "cc",    "conj",  "det",    "mark", "nmod",  "nsubj",
                                          "nummod", "obj",  "obl",    "xcomp"};

void check_spec(const SyntheticSpec& spec) {
    if (spec.min_length < 1 || spec.max_length < spec.min_length) {
        throw InputError("synthetic: bad sentence length range");
    }
    if (spec.structural_rank + 1 < spec.max_length) {
        throw InputError("synthetic: structural rank must be at least max_length - 1");
    }
    if (spec.labels < 2 || spec.labels > std::size(kRelationNames) + 1) {
        throw InputError("synthetic: label count must be in [2, " +
                         std::to_string(std::size(kRelationNames) + 1) + "]");
    }
    if (spec.structural_rank + spec.labels > spec.dim) {
        throw InputError("synthetic: dim too small for structural rank plus labels");
    }
    if (spec.layer_count == 0 || spec.planted_layer >= spec.layer_count) {
        throw InputError("synthetic: planted layer out of range");
    }
    if (spec.sentences == 0) throw InputError("synthetic: no sentences requested");
}

// Random recursive tree: heads[i] for token i+1, 0 for the root.
std::vector<int> random_tree(Rng& rng, std::size_t n) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 1);
    rng.shuffle(std::span<int>(order));
    std::vector<int> heads(n, 0);
    for (std::size_t k = 1; k < n; ++k) {
        heads[static_cast<std::size_t>(order[k] - 1)] = order[rng.below(k)];
    }
    return heads;
}

// Token positions in the structural subspace: sum of distinct orthonormal
// edge directions along the path from the root.
Eigen::MatrixXd tree_positions(Rng& rng, const std::vector<int>& heads, std::size_t rank) {
    const auto n = heads.size();
    std::vector<std::size_t> dirs(rank);
    std::iota(dirs.begin(), dirs.end(), 0);
    rng.shuffle(std::span<std::size_t>(dirs));

    Eigen::MatrixXd pos = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                static_cast<Eigen::Index>(rank));
    std::vector<bool> done(n, false);
    std::size_t next_dir = 0;
    std::vector<std::size_t> edge_dir(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (heads[i] != 0) edge_dir[i] = dirs[next_dir++];
    }
    // Resolve parents first.
    std::function<void(std::size_t)> place = [&](std::size_t i) {
        if (done[i]) return;
        if (heads[i] != 0) {
            const auto parent = static_cast<std::size_t>(heads[i] - 1);
            place(parent);
            pos.row(static_cast<Eigen::Index>(i)) = pos.row(static_cast<Eigen::Index>(parent));
            pos(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(edge_dir[i])) += 1.0;
        }
        done[i] = true;
    };
    for (std::size_t i = 0; i < n; ++i) place(i);
    return pos;
}

}  // namespace

PlantedBasis planted_basis(const SyntheticSpec& spec, std::uint64_t basis_seed) {
    check_spec(spec);
    Rng rng(basis_seed);
    const auto d = static_cast<Eigen::Index>(spec.dim);
    Eigen::MatrixXd gaussian(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) gaussian(r, c) = rng.normal();
    }
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian).householderQ();

    PlantedBasis basis;
    const auto rank = static_cast<Eigen::Index>(spec.structural_rank);
    const auto labels = static_cast<Eigen::Index>(spec.labels);
    basis.structural = q.leftCols(rank).transpose();
    basis.relational = q.middleCols(rank, labels).transpose();
    basis.label_names.emplace_back(kRootLabel);
    for (std::size_t k = 0; k + 1 < spec.labels; ++k) basis.label_names.emplace_back(kRelationNames[k]);
    std::sort(basis.label_names.begin(), basis.label_names.end());
    return basis;
}

SyntheticCorpus generate_corpus(const SyntheticSpec& spec, const PlantedBasis& basis) {
    check_spec(spec);
    const LabelInventory inventory(basis.label_names);
    const auto root_id = inventory.root_id();
    Rng rng(spec.seed);

    SyntheticCorpus corpus;
    corpus.embeddings.model_id = "synthetic/planted-layer-" + std::to_string(spec.planted_layer);
    corpus.embeddings.dim = static_cast<std::uint32_t>(spec.dim);
    corpus.embeddings.layer_count = spec.layer_count;
    corpus.embeddings.has_layer0 = false;

    const auto d = static_cast<Eigen::Index>(spec.dim);
    for (std::size_t s = 0; s < spec.sentences; ++s) {
        const auto n = static_cast<std::size_t>(
            spec.min_length + rng.below(spec.max_length - spec.min_length + 1));
        const auto heads = random_tree(rng, n);

        Sentence sentence;
        sentence.sent_id = spec.id_prefix + "-" + std::to_string(s + 1);
        std::vector<std::size_t> label_ids(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (heads[i] == 0) {
                label_ids[i] = root_id;
            } else {
                auto pick = static_cast<std::size_t>(rng.below(inventory.size() - 1));
                if (pick >= root_id) ++pick;
                label_ids[i] = pick;
            }
            sentence.tokens.push_back({static_cast<int>(i) + 1, "w" + std::to_string(i + 1), "",
                                       heads[i], inventory.label(label_ids[i])});
        }

        SentenceEmbedding emb;
        emb.sent_id = sentence.sent_id;
        emb.token_count = static_cast<std::uint32_t>(n);
        emb.payload.reserve(static_cast<std::size_t>(spec.layer_count) * n * spec.dim);
        for (std::uint32_t layer = 0; layer < spec.layer_count; ++layer) {
            std::vector<int> layer_heads = heads;
            std::vector<std::size_t> layer_labels = label_ids;
            if (layer != spec.planted_layer) {
                // Unrelated structure and relations.
                layer_heads = random_tree(rng, n);
                for (auto& id : layer_labels) id = static_cast<std::size_t>(rng.below(inventory.size()));
            }
            const Eigen::MatrixXd pos = tree_positions(rng, layer_heads, spec.structural_rank);
            Eigen::MatrixXd h = pos * basis.structural;
            for (std::size_t i = 0; i < n; ++i) {
                h.row(static_cast<Eigen::Index>(i)) +=
                    spec.label_scale * basis.relational.row(static_cast<Eigen::Index>(layer_labels[i]));
                for (Eigen::Index c = 0; c < d; ++c) h(static_cast<Eigen::Index>(i), c) += spec.noise * rng.normal();
            }
            for (Eigen::Index i = 0; i < h.rows(); ++i) {
                for (Eigen::Index c = 0; c < d; ++c) emb.payload.push_back(static_cast<float>(h(i, c)));
            }
        }
        corpus.sentences.push_back(std::move(sentence));
        corpus.embeddings.sentences.push_back(std::move(emb));
    }
    return corpus;
}

ProbeParams planted_probe(const SyntheticSpec& spec, const PlantedBasis& basis,
                          double relational_gain) {
    ProbeParams params;
    params.structural = basis.structural;
    params.relational = relational_gain * basis.relational;
    params.layer_spec = SingleLayer{spec.planted_layer};
    params.inventory = LabelInventory(basis.label_names);
    return params;
}

}  // namespace depprobe
