#include "depprobe/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "depprobe/error.hpp"
#include "depprobe/rng.hpp"

namespace depprobe {

void ProbeConfig::validate(std::size_t dim) const {
    if (dim == 0) throw InputError("embedding dim must be positive");
    if (rank == 0) throw InputError("structural rank must be positive");
    if (rank > dim) {
        throw InputError("structural rank " + std::to_string(rank) + " exceeds embedding dim " +
                         std::to_string(dim));
    }
    if (batch_size == 0) throw InputError("batch size must be positive");
    if (max_epochs == 0) throw InputError("max epochs must be positive");
    if (patience == 0) throw InputError("patience must be positive");
    if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
    if (!(plateau_factor >= 1.0)) throw InputError("plateau factor must be >= 1");
}

AdamW::AdamW(const ProbeParams& params, const ProbeConfig& config)
    : beta1_(config.beta1),
      beta2_(config.beta2),
      epsilon_(config.epsilon),
      weight_decay_(config.weight_decay),
      m_structural_(Eigen::MatrixXd::Zero(params.structural.rows(), params.structural.cols())),
      v_structural_(m_structural_),
      m_relational_(Eigen::MatrixXd::Zero(params.relational.rows(), params.relational.cols())),
      v_relational_(m_relational_) {
    if (const auto* mix = std::get_if<LayerMix>(&params.layer_spec)) {
        m_alpha_.assign(mix->alpha.size(), 0.0);
        v_alpha_.assign(mix->alpha.size(), 0.0);
    }
}

void AdamW::step(ProbeParams& params, const ProbeGradients& grads, double learning_rate) {
    ++steps_;
    const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    const double step_size = learning_rate / bias1;
    const double sqrt_bias2 = std::sqrt(bias2);

    auto update = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& g, Eigen::MatrixXd& m,
                      Eigen::MatrixXd& v) {
        p *= 1.0 - learning_rate * weight_decay_;
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
        p.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_bias2 + epsilon_);
    };
    update(params.structural, grads.structural, m_structural_, v_structural_);
    update(params.relational, grads.relational, m_relational_, v_relational_);

    if (auto* mix = std::get_if<LayerMix>(&params.layer_spec)) {
        for (std::size_t k = 0; k < mix->alpha.size(); ++k) {
            const double g = grads.alpha[k];
            m_alpha_[k] = beta1_ * m_alpha_[k] + (1.0 - beta1_) * g;
            v_alpha_[k] = beta2_ * v_alpha_[k] + (1.0 - beta2_) * g * g;
            mix->alpha[k] -= step_size * m_alpha_[k] / (std::sqrt(v_alpha_[k]) / sqrt_bias2 + epsilon_);
        }
    }
}

void write_training_log(const TrainingLog& log, std::ostream& out) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "initial dev_loss=%.17g\n", log.initial_dev_loss);
    out << buf;
    for (const auto& e : log.epochs) {
        std::snprintf(buf, sizeof buf, "epoch=%zu train_loss=%.17g dev_loss=%.17g lr=%.17g improved=%d\n",
                      e.epoch, e.train_loss, e.dev_loss, e.learning_rate, e.improved ? 1 : 0);
        out << buf;
    }
    out << "best_epoch=" << log.best_epoch << "\n";
    out << "stop_reason=" << log.stop_reason << "\n";
}

ProbeParams initialize_params(std::size_t dim, const LabelInventory& inventory,
                              const ProbeConfig& config) {
    config.validate(dim);
    Rng rng(config.seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    auto fill = [&](Eigen::Index rows) {
        Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(dim));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-bound, bound);
        }
        return m;
    };
    ProbeParams params;
    params.structural = fill(static_cast<Eigen::Index>(config.rank));
    params.relational = fill(static_cast<Eigen::Index>(inventory.size()));
    params.layer_spec = config.layer_spec;
    if (auto* mix = std::get_if<LayerMix>(&params.layer_spec)) {
        std::fill(mix->alpha.begin(), mix->alpha.end(), 0.0);
    }
    params.inventory = inventory;
    return params;
}

std::vector<ProbeExample> build_examples(const std::vector<Sentence>& sentences,
                                         const EmbeddingSet& embeddings,
                                         const LabelInventory& inventory,
                                         const LayerSpec& layer_spec, bool require_known_labels) {
    check_layer_spec(embeddings, layer_spec);
    if (sentences.size() != embeddings.sentences.size()) {
        const std::size_t first = std::min(sentences.size(), embeddings.sentences.size());
        const std::string where =
            first < sentences.size() ? "first unmatched sentence '" + sentences[first].sent_id + "'"
                                     : "first unmatched embedding '" +
                                           embeddings.sentences[first].sent_id + "'";
        throw InputError("alignment: " + std::to_string(sentences.size()) + " sentences vs " +
                         std::to_string(embeddings.sentences.size()) + " embedded sentences; " +
                         where);
    }
    std::vector<std::uint32_t> layer_ids;
    if (const auto* single = std::get_if<SingleLayer>(&layer_spec)) {
        layer_ids.push_back(single->index);
    } else {
        layer_ids = mixable_layers(embeddings.layer_count, embeddings.has_layer0,
                                   std::get<LayerMix>(layer_spec).include_layer0);
    }

    std::vector<ProbeExample> out;
    out.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const auto& s = sentences[i];
        const auto& e = embeddings.sentences[i];
        if (s.sent_id != e.sent_id) {
            throw InputError("alignment: sentence " + std::to_string(i + 1) + " is '" + s.sent_id +
                             "' in the treebank but '" + e.sent_id + "' in the embeddings");
        }
        if (s.size() != e.token_count) {
            throw InputError("alignment: sentence '" + s.sent_id + "' has " +
                             std::to_string(s.size()) + " words but " +
                             std::to_string(e.token_count) + " embedded tokens");
        }
        ProbeExample ex;
        for (auto k : layer_ids) ex.layers.push_back(embeddings.layer(i, k).cast<double>());
        for (const auto& layer : ex.layers) {
            if (!layer.allFinite()) {
                throw InputError("embeddings for sentence '" + s.sent_id + "' contain non-finite values");
            }
        }
        ex.tree_distances = distance_matrix(tree_distances(s));
        for (const auto& t : s.tokens) {
            const auto id = inventory.find(t.deprel);
            if (!id && require_known_labels) {
                throw InputError("sentence '" + s.sent_id + "': label '" + t.deprel +
                                 "' is not in the label inventory");
            }
            ex.labels.push_back(id ? static_cast<int>(*id) : -1);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

namespace {

void check_finite(double value, const char* what, std::size_t epoch, std::size_t batch,
                  const LossBreakdown& loss) {
    if (std::isfinite(value)) return;
    std::ostringstream msg;
    msg << "non-finite " << what << " at epoch " << epoch << ", batch " << batch
        << " (structural=" << loss.structural << ", relational=" << loss.relational << ")";
    throw NumericError(msg.str());
}

}  // namespace

TrainResult train(const ProbeConfig& config, std::vector<ProbeExample> train_examples,
                  const std::vector<ProbeExample>& dev_examples, const LabelInventory& inventory,
                  const EpochCallback& on_epoch) {
    if (train_examples.empty()) throw InputError("no training sentences");
    if (dev_examples.empty()) throw InputError("no dev sentences");
    for (const auto& ex : train_examples) {
        for (int label : ex.labels) {
            if (label < 0) throw InputError("training data contains labels outside the inventory");
        }
    }
    const auto dim = static_cast<std::size_t>(train_examples.front().layers.front().cols());

    ProbeParams params = initialize_params(dim, inventory, config);
    // Shuffling uses a stream separate from initialization.
    Rng shuffle_rng(substream_seed(config.seed, 1));
    AdamW optimizer(params, config);

    TrainResult result;
    TrainState state;
    state.learning_rate = config.learning_rate;
    const auto initial = batch_loss(params, dev_examples, config.distance_mode);
    check_finite(initial.total(), "initial dev loss", 0, 0, initial);
    state.best_dev_loss = initial.total();
    result.log.initial_dev_loss = state.best_dev_loss;
    result.params = params;
    result.log.stop_reason = "max_epochs";

    for (state.epoch = 1; state.epoch <= config.max_epochs; ++state.epoch) {
        shuffle_rng.shuffle(std::span<ProbeExample>(train_examples));
        double train_total = 0.0;
        std::size_t batches = 0;
        const std::span<const ProbeExample> all(train_examples);
        for (std::size_t start = 0; start < all.size(); start += config.batch_size) {
            const auto batch = all.subspan(start, std::min(config.batch_size, all.size() - start));
            const auto grads = gradients(params, batch, config.distance_mode);
            check_finite(grads.loss.total(), "training loss", state.epoch, batches, grads.loss);
            check_finite(grads.squared_norm(), "gradient", state.epoch, batches, grads.loss);
            optimizer.step(params, grads, state.learning_rate);
            train_total += grads.loss.total();
            ++batches;
        }

        EpochRecord record;
        record.epoch = state.epoch;
        record.train_loss = train_total / static_cast<double>(batches);
        record.learning_rate = state.learning_rate;
        const auto dev = batch_loss(params, dev_examples, config.distance_mode);
        check_finite(dev.total(), "dev loss", state.epoch, batches, dev);
        record.dev_loss = dev.total();
        record.improved =
            record.dev_loss < state.best_dev_loss - config.min_improvement * std::abs(state.best_dev_loss);
        result.log.epochs.push_back(record);
        if (on_epoch) on_epoch(record);

        if (record.improved) {
            state.best_dev_loss = record.dev_loss;
            state.epochs_without_improvement = 0;
            result.params = params;
            result.log.best_epoch = state.epoch;
        } else {
            ++state.epochs_without_improvement;
            if (state.epochs_without_improvement >= config.patience) {
                result.log.stop_reason = "early_stop";
                break;
            }
            state.learning_rate /= config.plateau_factor;
        }
    }
    return result;
}

}  // namespace depprobe
