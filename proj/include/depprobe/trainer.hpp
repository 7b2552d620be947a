#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "depprobe/embstore.hpp"
#include "depprobe/probe.hpp"
#include "depprobe/treebank.hpp"

namespace depprobe {

inline constexpr std::array<std::uint64_t, 3> kDefaultSeeds = {692, 710, 932};

struct ProbeConfig {
    std::size_t rank = 128;
    LayerSpec layer_spec = SingleLayer{};
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 30;
    std::size_t patience = 3;          // non-improving epochs before stopping
    double plateau_factor = 10.0;      // lr divisor after a non-improving epoch
    double min_improvement = 1e-4;     // relative dev-loss improvement that counts
    std::uint64_t seed = kDefaultSeeds[0];
    DistanceMode distance_mode = DistanceMode::L2;

    // AdamW
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;

    // Throws InputError on invalid settings for embeddings of width `dim`.
    void validate(std::size_t dim) const;
};

// Decoupled weight decay Adam over B, L and (undecayed) mixture weights.
class AdamW {
public:
    AdamW(const ProbeParams& params, const ProbeConfig& config);

    void step(ProbeParams& params, const ProbeGradients& grads, double learning_rate);

    std::uint64_t steps() const { return steps_; }

private:
    double beta1_, beta2_, epsilon_, weight_decay_;
    std::uint64_t steps_ = 0;
    Eigen::MatrixXd m_structural_, v_structural_;
    Eigen::MatrixXd m_relational_, v_relational_;
    std::vector<double> m_alpha_, v_alpha_;
};

struct TrainState {
    double learning_rate = 0.0;
    std::size_t epochs_without_improvement = 0;
    double best_dev_loss = 0.0;
    std::size_t epoch = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double dev_loss = 0.0;
    double learning_rate = 0.0;
    bool improved = false;
};

struct TrainingLog {
    double initial_dev_loss = 0.0;
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 0 = initialization
    std::string stop_reason;     // "early_stop" | "max_epochs"
};

void write_training_log(const TrainingLog& log, std::ostream& out);

struct TrainResult {
    ProbeParams params;
    TrainingLog log;
};

ProbeParams initialize_params(std::size_t dim, const LabelInventory& inventory,
                              const ProbeConfig& config);

// Aligns sentences with their embeddings by position; throws InputError
// naming the first offending sent_id. With `require_known_labels`, a
// deprel missing from `inventory` is an error, otherwise it maps to -1.
std::vector<ProbeExample> build_examples(const std::vector<Sentence>& sentences,
                                         const EmbeddingSet& embeddings,
                                         const LabelInventory& inventory,
                                         const LayerSpec& layer_spec, bool require_known_labels);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Deterministic given config.seed. Returns the parameters with the lowest
// dev loss seen (including the initialization).
TrainResult train(const ProbeConfig& config, std::vector<ProbeExample> train_examples,
                  const std::vector<ProbeExample>& dev_examples, const LabelInventory& inventory,
                  const EpochCallback& on_epoch = {});

}  // namespace depprobe
