#include "depprobe/probe.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "depprobe/error.hpp"

namespace depprobe {

std::string to_string(DistanceMode mode) {
    return mode == DistanceMode::L2 ? "l2" : "squared";
}

DistanceMode parse_distance_mode(std::string_view text) {
    if (text == "l2") return DistanceMode::L2;
    if (text == "squared" || text == "squared_l2") return DistanceMode::SquaredL2;
    throw InputError("unknown distance mode '" + std::string(text) + "' (expected l2|squared)");
}

std::size_t trainable_parameter_count(std::size_t dim, std::size_t rank, std::size_t labels) {
    return rank * dim + labels * dim;
}

std::size_t ProbeParams::trainable_parameter_count() const {
    std::size_t count = depprobe::trainable_parameter_count(dim(), rank(), label_count());
    if (const auto* mix = std::get_if<LayerMix>(&layer_spec)) count += mix->alpha.size();
    return count;
}

bool ProbeParams::operator==(const ProbeParams& other) const {
    return structural.rows() == other.structural.rows() &&
           structural.cols() == other.structural.cols() &&
           relational.rows() == other.relational.rows() &&
           relational.cols() == other.relational.cols() && structural == other.structural &&
           relational == other.relational && layer_spec == other.layer_spec &&
           inventory == other.inventory;
}

Eigen::MatrixXd distance_matrix(const GoldTree& tree) {
    const auto n = static_cast<Eigen::Index>(tree.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = tree.distances[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return m;
}

Eigen::MatrixXd representation(const ProbeParams& params, const ProbeExample& example) {
    if (example.layers.empty()) throw InputError("probe example without representations");
    const auto* mix = std::get_if<LayerMix>(&params.layer_spec);
    if (mix == nullptr) return example.layers.front();
    if (mix->alpha.size() != example.layers.size()) {
        throw InputError("layer mixture has " + std::to_string(mix->alpha.size()) +
                         " weights but the example stores " +
                         std::to_string(example.layers.size()) + " layers");
    }
    const auto weights = mixture_weights(mix->alpha);
    Eigen::MatrixXd h = weights[0] * example.layers[0];
    for (std::size_t k = 1; k < weights.size(); ++k) h += weights[k] * example.layers[k];
    return h;
}

Eigen::MatrixXd structural_distance(const ProbeParams& params, const Eigen::MatrixXd& h,
                                    DistanceMode mode) {
    const Eigen::MatrixXd z = h * params.structural.transpose();
    const auto n = z.rows();
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double sq = (z.row(i) - z.row(j)).squaredNorm();
            const double v = mode == DistanceMode::L2 ? std::sqrt(sq) : sq;
            dist(i, j) = v;
            dist(j, i) = v;
        }
    }
    return dist;
}

double structural_loss(const ProbeParams& params, const Eigen::MatrixXd& h,
                       const Eigen::MatrixXd& tree_distances, DistanceMode mode) {
    const auto n = h.rows();
    if (n < 2) return 0.0;
    const Eigen::MatrixXd dist = structural_distance(params, h, mode);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) total += std::abs(tree_distances(i, j) - dist(i, j));
    }
    return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

Eigen::MatrixXd relational_logits(const ProbeParams& params, const Eigen::MatrixXd& h) {
    return h * params.relational.transpose();
}

namespace {

// log-softmax of one row.
Eigen::RowVectorXd log_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    const double top = row.maxCoeff();
    const double lse = top + std::log((row.array() - top).exp().sum());
    return row.array() - lse;
}

double sign(double x) { return (x > 0.0) - (x < 0.0); }

struct SentenceTerms {
    double structural = 0.0;
    double relational = 0.0;
    bool has_structural = false;
    Eigen::MatrixXd grad_z;       // n x b, d loss_s / d Z
    Eigen::MatrixXd grad_logits;  // n x l, d loss_r / d Y
};

SentenceTerms sentence_terms(const ProbeParams& params, const Eigen::MatrixXd& h,
                             const ProbeExample& ex, DistanceMode mode, bool want_grad) {
    SentenceTerms out;
    const auto n = h.rows();
    if (ex.labels.size() != static_cast<std::size_t>(n) || ex.tree_distances.rows() != n) {
        throw InputError("probe example shape mismatch");
    }

    if (n >= 2) {
        out.has_structural = true;
        const Eigen::MatrixXd z = h * params.structural.transpose();
        const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
        Eigen::MatrixXd coeff;
        if (want_grad) coeff = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double sq = (z.row(i) - z.row(j)).squaredNorm();
                const double d = mode == DistanceMode::L2 ? std::sqrt(sq) : sq;
                const double diff = d - ex.tree_distances(i, j);
                out.structural += std::abs(diff);
                if (!want_grad) continue;
                double g = 0.0;
                if (mode == DistanceMode::L2) {
                    if (d > 0.0) g = sign(diff) / (pairs * d);
                } else {
                    g = 2.0 * sign(diff) / pairs;
                }
                coeff(i, j) = g;
                coeff(j, i) = g;
            }
        }
        out.structural /= pairs;
        if (want_grad) {
            // Graph Laplacian of the pair coefficients.
            Eigen::MatrixXd lap = -coeff;
            lap.diagonal() = coeff.rowwise().sum();
            out.grad_z = lap * z;
        }
    }

    const Eigen::MatrixXd logits = relational_logits(params, h);
    if (want_grad) out.grad_logits = Eigen::MatrixXd::Zero(n, logits.cols());
    std::size_t known = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (ex.labels[static_cast<std::size_t>(i)] >= 0) ++known;
    }
    if (known > 0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const int gold = ex.labels[static_cast<std::size_t>(i)];
            if (gold < 0) continue;
            if (gold >= logits.cols()) throw InputError("label id out of range");
            const Eigen::RowVectorXd lsm = log_softmax(logits.row(i));
            out.relational -= lsm(gold);
            if (want_grad) {
                out.grad_logits.row(i) = lsm.array().exp();
                out.grad_logits(i, gold) -= 1.0;
            }
        }
        out.relational /= static_cast<double>(known);
        if (want_grad) out.grad_logits /= static_cast<double>(known);
    }
    return out;
}

}  // namespace

double relational_loss(const ProbeParams& params, const Eigen::MatrixXd& h,
                       std::span<const int> labels) {
    const Eigen::MatrixXd logits = relational_logits(params, h);
    if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
        throw InputError("relational_loss: label count does not match token count");
    }
    double total = 0.0;
    std::size_t known = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int gold = labels[static_cast<std::size_t>(i)];
        if (gold < 0) continue;
        total -= log_softmax(logits.row(i))(gold);
        ++known;
    }
    return known == 0 ? 0.0 : total / static_cast<double>(known);
}

LossBreakdown batch_loss(const ProbeParams& params, std::span<const ProbeExample> batch,
                         DistanceMode mode) {
    LossBreakdown loss;
    std::size_t structural_count = 0;
    for (const auto& ex : batch) {
        const auto terms = sentence_terms(params, representation(params, ex), ex, mode, false);
        if (terms.has_structural) {
            loss.structural += terms.structural;
            ++structural_count;
        }
        loss.relational += terms.relational;
    }
    if (structural_count > 0) loss.structural /= static_cast<double>(structural_count);
    if (!batch.empty()) loss.relational /= static_cast<double>(batch.size());
    return loss;
}

double ProbeGradients::squared_norm() const {
    double total = structural.squaredNorm() + relational.squaredNorm();
    for (double a : alpha) total += a * a;
    return total;
}

ProbeGradients gradients(const ProbeParams& params, std::span<const ProbeExample> batch,
                         DistanceMode mode) {
    if (batch.empty()) throw InputError("gradients: empty batch");
    ProbeGradients grads;
    grads.structural = Eigen::MatrixXd::Zero(params.structural.rows(), params.structural.cols());
    grads.relational = Eigen::MatrixXd::Zero(params.relational.rows(), params.relational.cols());
    const auto* mix = std::get_if<LayerMix>(&params.layer_spec);
    std::vector<double> weights;
    if (mix != nullptr) {
        weights = mixture_weights(mix->alpha);
        grads.alpha.assign(weights.size(), 0.0);
    }

    std::size_t structural_count = 0;
    for (const auto& ex : batch) {
        if (ex.size() >= 2) ++structural_count;
    }
    const double structural_scale =
        structural_count > 0 ? 1.0 / static_cast<double>(structural_count) : 0.0;
    const double relational_scale = 1.0 / static_cast<double>(batch.size());

    for (const auto& ex : batch) {
        const Eigen::MatrixXd h = representation(params, ex);
        auto terms = sentence_terms(params, h, ex, mode, true);
        if (terms.has_structural) {
            grads.loss.structural += terms.structural;
            terms.grad_z *= structural_scale;
            grads.structural.noalias() += terms.grad_z.transpose() * h;
        }
        grads.loss.relational += terms.relational;
        terms.grad_logits *= relational_scale;
        grads.relational.noalias() += terms.grad_logits.transpose() * h;

        if (mix != nullptr) {
            Eigen::MatrixXd grad_h = terms.grad_logits * params.relational;
            if (terms.has_structural) grad_h.noalias() += terms.grad_z * params.structural;
            // d/dw_k then through the softmax Jacobian.
            std::vector<double> grad_w(weights.size());
            double weighted = 0.0;
            for (std::size_t k = 0; k < weights.size(); ++k) {
                grad_w[k] = grad_h.cwiseProduct(ex.layers[k]).sum();
                weighted += weights[k] * grad_w[k];
            }
            for (std::size_t k = 0; k < weights.size(); ++k) {
                grads.alpha[k] += weights[k] * (grad_w[k] - weighted);
            }
        }
    }
    grads.loss.structural *= structural_scale;
    grads.loss.relational *= relational_scale;
    return grads;
}

namespace {

constexpr std::uint32_t kDprbVersion = 1;

void write_matrix(detail::LeWriter& w, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(static_cast<float>(m(r, c)));
    }
}

Eigen::MatrixXd read_matrix(detail::LeReader& r, std::uint32_t rows, std::uint32_t cols,
                            const char* what) {
    std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
    r.f32s(buf, what);
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = buf[static_cast<std::size_t>(i) * cols + j];
    }
    return m;
}

}  // namespace

void write_dprb(const ProbeParams& params, std::ostream& out) {
    if (params.structural.cols() != params.relational.cols()) {
        throw InputError("DPRB: B and L disagree on embedding dim");
    }
    if (params.inventory.size() != params.label_count()) {
        throw InputError("DPRB: label inventory size does not match L rows");
    }
    detail::LeWriter w(out);
    w.raw("DPRB", 4);
    w.u32(kDprbVersion);
    w.u32(static_cast<std::uint32_t>(params.dim()));
    w.u32(static_cast<std::uint32_t>(params.rank()));
    w.u32(static_cast<std::uint32_t>(params.label_count()));
    w.u32(static_cast<std::uint32_t>(params.inventory.size()));
    for (const auto& label : params.inventory.labels()) w.str(label);
    if (const auto* single = std::get_if<SingleLayer>(&params.layer_spec)) {
        w.u8(0);
        w.u32(single->index);
    } else {
        const auto& mix = std::get<LayerMix>(params.layer_spec);
        w.u8(1);
        w.u32(static_cast<std::uint32_t>(mix.alpha.size()));
        for (double a : mix.alpha) w.f32(static_cast<float>(a));
        w.u8(mix.include_layer0 ? 1 : 0);
    }
    write_matrix(w, params.structural);
    write_matrix(w, params.relational);
}

ProbeParams read_dprb(std::istream& in) {
    detail::LeReader r(in, "DPRB");
    r.magic("DPRB");
    const auto version = r.u32("version");
    if (version != kDprbVersion) throw InputError("DPRB: unsupported version " + std::to_string(version));
    const auto d = r.u32("d");
    const auto b = r.u32("b");
    const auto l = r.u32("l");
    const auto count = r.u32("label count");
    if (count != l) {
        throw InputError("DPRB: label block holds " + std::to_string(count) + " labels, l = " +
                         std::to_string(l));
    }
    std::vector<std::string> labels;
    labels.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) labels.push_back(r.str("label"));
    ProbeParams params;
    params.inventory = LabelInventory(labels);
    if (params.inventory.labels() != labels) {
        throw InputError("DPRB: label block is not sorted and unique");
    }
    const auto mode = r.u8("layer mode");
    if (mode == 0) {
        params.layer_spec = SingleLayer{r.u32("layer index")};
    } else if (mode == 1) {
        LayerMix mix;
        const auto n = r.u32("alpha count");
        if (n > (1u << 16)) throw InputError("DPRB: implausible alpha count");
        for (std::uint32_t k = 0; k < n; ++k) mix.alpha.push_back(r.f32("alpha"));
        mix.include_layer0 = r.u8("include_layer0") != 0;
        params.layer_spec = std::move(mix);
    } else {
        throw InputError("DPRB: unknown layer mode " + std::to_string(mode));
    }
    if (static_cast<std::uint64_t>(b) * d > (std::uint64_t{1} << 30) ||
        static_cast<std::uint64_t>(l) * d > (std::uint64_t{1} << 30)) {
        throw InputError("DPRB: implausible matrix shape");
    }
    params.structural = read_matrix(r, b, d, "B");
    params.relational = read_matrix(r, l, d, "L");
    r.expect_end();
    return params;
}

void write_dprb_file(const ProbeParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + path + " for writing");
    write_dprb(params, out);
}

ProbeParams read_dprb_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    try {
        return read_dprb(in);
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

}  // namespace depprobe
