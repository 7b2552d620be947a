#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "depprobe/embstore.hpp"
#include "depprobe/probe.hpp"
#include "depprobe/treebank.hpp"

namespace depprobe {

// Corpus with a linear dependency structure planted in the embeddings.
//
// Each token's position is the sum of orthonormal edge vectors on its path
// from the root, so squared distances under the planted structural map equal
// tree path lengths. A disjoint set of directions carries a one-hot code of
// the token's relation. Both subspaces are rotated into `dim` dimensions and
// isotropic noise is added. Layers other than `planted_layer` hold structure
// of an unrelated random tree and shuffled labels.
struct SyntheticSpec {
    std::size_t sentences = 500;
    std::size_t min_length = 5;
    std::size_t max_length = 15;
    std::size_t dim = 64;
    std::size_t structural_rank = 16;  // must be >= max_length - 1
    std::size_t labels = 8;            // including "root"
    double label_scale = 0.5;
    double noise = 0.01;
    std::uint32_t layer_count = 1;
    std::uint32_t planted_layer = 0;
    std::uint64_t seed = 1;
    std::string id_prefix = "syn";
};

struct SyntheticCorpus {
    std::vector<Sentence> sentences;
    EmbeddingSet embeddings;
};

// The hidden maps shared by every corpus generated from the same
// `basis_seed`, so train and dev splits live in the same space.
struct PlantedBasis {
    Eigen::MatrixXd structural;  // structural_rank x dim, orthonormal rows
    Eigen::MatrixXd relational;  // labels x dim, orthonormal rows
    std::vector<std::string> label_names;
};

PlantedBasis planted_basis(const SyntheticSpec& spec, std::uint64_t basis_seed);

SyntheticCorpus generate_corpus(const SyntheticSpec& spec, const PlantedBasis& basis);

// Probe built directly from the planted maps (its structural distances are
// square roots of tree distances, its logits favour the gold relation).
ProbeParams planted_probe(const SyntheticSpec& spec, const PlantedBasis& basis,
                          double relational_gain = 10.0);

}  // namespace depprobe
