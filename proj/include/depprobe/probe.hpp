#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "depprobe/embstore.hpp"
#include "depprobe/treebank.hpp"

namespace depprobe {

enum class DistanceMode {
    L2,         // ||B(h_i - h_j)||
    SquaredL2,  // ||B(h_i - h_j)||^2
};

std::string to_string(DistanceMode mode);
DistanceMode parse_distance_mode(std::string_view text);

// Trainable state of a probe: the structural map B (b x d), the relational
// map L (l x d) and, for layer mixtures, the raw mixture weights.
struct ProbeParams {
    Eigen::MatrixXd structural;
    Eigen::MatrixXd relational;
    LayerSpec layer_spec = SingleLayer{};
    LabelInventory inventory;

    std::size_t dim() const { return static_cast<std::size_t>(structural.cols()); }
    std::size_t rank() const { return static_cast<std::size_t>(structural.rows()); }
    std::size_t label_count() const { return static_cast<std::size_t>(relational.rows()); }

    // B and L entries plus mixture weights, if any.
    std::size_t trainable_parameter_count() const;

    bool operator==(const ProbeParams&) const;
};

std::size_t trainable_parameter_count(std::size_t dim, std::size_t rank, std::size_t labels);

// One training/evaluation sentence in probe-ready form.
struct ProbeExample {
    // Single layer: exactly one matrix. Mixture: one per mixable layer, in
    // the order of the mixture weights. Each is token_count x dim.
    std::vector<Eigen::MatrixXd> layers;
    Eigen::MatrixXd tree_distances;  // gold path lengths, n x n
    std::vector<int> labels;         // inventory ids, -1 if unseen in training

    std::size_t size() const { return static_cast<std::size_t>(tree_distances.rows()); }
};

// Gold path lengths as a dense matrix.
Eigen::MatrixXd distance_matrix(const GoldTree& tree);

// Representation the probe sees for `example` under `params.layer_spec`.
Eigen::MatrixXd representation(const ProbeParams& params, const ProbeExample& example);

Eigen::MatrixXd structural_distance(const ProbeParams& params, const Eigen::MatrixXd& h,
                                    DistanceMode mode = DistanceMode::L2);

// Mean over pairs i<j of |tree_distance - predicted_distance|; 0 when n < 2.
double structural_loss(const ProbeParams& params, const Eigen::MatrixXd& h,
                       const Eigen::MatrixXd& tree_distances, DistanceMode mode = DistanceMode::L2);

// n x l, row i = L h_i.
Eigen::MatrixXd relational_logits(const ProbeParams& params, const Eigen::MatrixXd& h);

// Mean cross entropy over tokens with a known label (-1 entries are skipped).
// Returns 0 if no token has a known label.
double relational_loss(const ProbeParams& params, const Eigen::MatrixXd& h,
                       std::span<const int> labels);

struct LossBreakdown {
    double structural = 0.0;  // mean over sentences with n >= 2
    double relational = 0.0;  // mean over sentences
    double total() const { return structural + relational; }
};

LossBreakdown batch_loss(const ProbeParams& params, std::span<const ProbeExample> batch,
                         DistanceMode mode = DistanceMode::L2);

struct ProbeGradients {
    Eigen::MatrixXd structural;
    Eigen::MatrixXd relational;
    std::vector<double> alpha;  // empty for single-layer probes
    LossBreakdown loss;

    double squared_norm() const;
};

// Analytic gradient of batch_loss(...).total() with respect to B, L and
// the raw mixture weights. Subgradient 0 at |x| kinks and zero distances.
ProbeGradients gradients(const ProbeParams& params, std::span<const ProbeExample> batch,
                         DistanceMode mode = DistanceMode::L2);

// DPRB v1 probe files.
void write_dprb(const ProbeParams& params, std::ostream& out);
ProbeParams read_dprb(std::istream& in);
void write_dprb_file(const ProbeParams& params, const std::string& path);
ProbeParams read_dprb_file(const std::string& path);

}  // namespace depprobe
