#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "depprobe/probe.hpp"
#include "depprobe/treebank.hpp"

namespace depprobe {

struct PredictedTree {
    int root_index = 0;               // 1-based
    std::vector<int> heads;           // per token, 0 for the root
    std::vector<std::string> labels;  // per token

    std::size_t size() const { return heads.size(); }
};

// Minimum spanning tree over a dense symmetric distance matrix (Prim).
// Returns n-1 edges on 1-based positions, sorted. Equal-weight candidates
// are resolved toward the lexicographically smaller edge.
std::vector<Edge> mst(const Eigen::MatrixXd& distances);

// 1-based token with the highest root probability; ties go to the lowest index.
int select_root(const Eigen::MatrixXd& logits, const LabelInventory& inventory);

// Orients `edges` away from `root` and labels each non-root token with its
// own best non-root class.
PredictedTree orient_and_label(const std::vector<Edge>& edges, int root,
                               const Eigen::MatrixXd& logits, const LabelInventory& inventory);

PredictedTree decode(const ProbeParams& params, const Eigen::MatrixXd& h,
                     DistanceMode mode = DistanceMode::L2);

// Copies IDs and forms from `source`, takes heads and labels from `tree`.
Sentence to_sentence(const Sentence& source, const PredictedTree& tree);

// Throws InputError unless `tree` is a single-rooted tree with one "root" label.
void check_predicted_tree(const PredictedTree& tree);

}  // namespace depprobe
