#include "depprobe/embstore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "depprobe/error.hpp"

namespace depprobe {

namespace {

constexpr std::uint32_t kEmbfVersion = 1;
constexpr std::uint32_t kFlagLayer0 = 1u;

std::uint64_t payload_size(const EmbeddingSet& set, std::uint32_t token_count) {
    return static_cast<std::uint64_t>(set.layer_count) * token_count * set.dim;
}

}  // namespace

Eigen::Map<const MatrixXfRow> EmbeddingSet::layer(std::size_t sentence, std::size_t layer) const {
    const auto& s = sentences.at(sentence);
    if (layer >= layer_count) {
        throw InputError("layer " + std::to_string(layer) + " out of range [0, " +
                         std::to_string(layer_count) + ")");
    }
    const auto stride = static_cast<std::size_t>(s.token_count) * dim;
    return {s.payload.data() + layer * stride, static_cast<Eigen::Index>(s.token_count),
            static_cast<Eigen::Index>(dim)};
}

void EmbeddingSet::validate() const {
    if (sentences.empty()) throw InputError("embedding set: no sentences");
    if (dim == 0) throw InputError("embedding set: dim must be positive");
    if (layer_count == 0) throw InputError("embedding set: layer_count must be positive");
    for (const auto& s : sentences) {
        if (s.payload.size() != payload_size(*this, s.token_count)) {
            throw InputError("embedding set: sentence '" + s.sent_id + "' holds " +
                             std::to_string(s.payload.size()) + " floats, expected " +
                             std::to_string(payload_size(*this, s.token_count)));
        }
    }
}

std::vector<std::uint32_t> mixable_layers(std::uint32_t layer_count, bool has_layer0,
                                          bool include_layer0) {
    std::vector<std::uint32_t> out;
    const std::uint32_t first = (has_layer0 && !include_layer0) ? 1 : 0;
    for (std::uint32_t k = first; k < layer_count; ++k) out.push_back(k);
    return out;
}

LayerMix uniform_mix(const EmbeddingSet& set, bool include_layer0) {
    LayerMix mix;
    mix.include_layer0 = include_layer0;
    mix.alpha.assign(mixable_layers(set.layer_count, set.has_layer0, include_layer0).size(), 0.0);
    return mix;
}

std::vector<double> mixture_weights(std::span<const double> alpha) {
    std::vector<double> w(alpha.begin(), alpha.end());
    if (w.empty()) return w;
    const double top = *std::max_element(w.begin(), w.end());
    double total = 0.0;
    for (auto& v : w) {
        v = std::exp(v - top);
        total += v;
    }
    for (auto& v : w) v /= total;
    return w;
}

void check_layer_spec(const EmbeddingSet& set, const LayerSpec& spec) {
    if (const auto* single = std::get_if<SingleLayer>(&spec)) {
        if (single->index >= set.layer_count) {
            throw InputError("layer " + std::to_string(single->index) + " out of range [0, " +
                             std::to_string(set.layer_count) + ")");
        }
        return;
    }
    const auto& mix = std::get<LayerMix>(spec);
    const auto layers = mixable_layers(set.layer_count, set.has_layer0, mix.include_layer0);
    if (layers.empty()) throw InputError("layer mixture over zero layers");
    if (mix.alpha.size() != layers.size()) {
        throw InputError("layer mixture has " + std::to_string(mix.alpha.size()) +
                         " weights for " + std::to_string(layers.size()) + " mixable layers");
    }
}

Eigen::MatrixXd materialize(const EmbeddingSet& set, const LayerSpec& spec, std::size_t sentence) {
    check_layer_spec(set, spec);
    if (const auto* single = std::get_if<SingleLayer>(&spec)) {
        return set.layer(sentence, single->index).cast<double>();
    }
    const auto& mix = std::get<LayerMix>(spec);
    const auto layers = mixable_layers(set.layer_count, set.has_layer0, mix.include_layer0);
    const auto weights = mixture_weights(mix.alpha);
    const auto& s = set.sentences.at(sentence);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s.token_count, set.dim);
    for (std::size_t k = 0; k < layers.size(); ++k) {
        out += weights[k] * set.layer(sentence, layers[k]).cast<double>();
    }
    return out;
}

std::uint32_t middle_layer(std::uint32_t layer_count_stored, bool has_layer0) {
    if (layer_count_stored == 0) throw InputError("middle_layer: no stored layers");
    const std::uint32_t transformer_layers = has_layer0 ? layer_count_stored - 1 : layer_count_stored;
    if (transformer_layers == 0) return 0;
    const std::uint32_t middle = (transformer_layers + 1) / 2;  // 1-based
    return has_layer0 ? middle : middle - 1;
}

std::uint64_t write_embf(const EmbeddingSet& set, std::ostream& out) {
    set.validate();
    detail::LeWriter w(out);
    w.raw("EMBF", 4);
    w.u32(kEmbfVersion);
    w.str(set.model_id);
    w.u32(set.has_layer0 ? kFlagLayer0 : 0u);
    w.u32(set.layer_count);
    w.u32(set.dim);
    w.u32(static_cast<std::uint32_t>(set.sentences.size()));
    for (const auto& s : set.sentences) {
        w.str(s.sent_id);
        w.u32(s.token_count);
        w.f32s(s.payload);
    }
    return w.written();
}

namespace {

EmbfHeader read_header(detail::LeReader& r) {
    r.magic("EMBF");
    EmbfHeader h;
    h.version = r.u32("version");
    if (h.version != kEmbfVersion) {
        throw InputError("EMBF: unsupported version " + std::to_string(h.version));
    }
    h.model_id = r.str("model_id");
    h.flags = r.u32("flags");
    h.layer_count = r.u32("layer_count");
    h.dim = r.u32("dim");
    h.sentence_count = r.u32("sentence_count");
    return h;
}

}  // namespace

EmbfHeader read_embf_header(std::istream& in) {
    detail::LeReader r(in, "EMBF");
    return read_header(r);
}

EmbeddingSet read_embf(std::istream& in) {
    detail::LeReader r(in, "EMBF");
    const auto h = read_header(r);
    EmbeddingSet set;
    set.model_id = h.model_id;
    set.has_layer0 = (h.flags & kFlagLayer0) != 0;
    set.layer_count = h.layer_count;
    set.dim = h.dim;
    if (h.sentence_count == 0) throw InputError("EMBF: no sentences");
    set.sentences.reserve(h.sentence_count);
    for (std::uint32_t i = 0; i < h.sentence_count; ++i) {
        SentenceEmbedding s;
        s.sent_id = r.str("sent_id");
        s.token_count = r.u32("token_count");
        const auto floats = payload_size(set, s.token_count);
        if (floats > (std::uint64_t{1} << 32)) {
            throw InputError("EMBF: sentence '" + s.sent_id + "' declares an implausible payload");
        }
        s.payload.resize(static_cast<std::size_t>(floats));
        r.f32s(s.payload, "payload");
        set.sentences.push_back(std::move(s));
    }
    r.expect_end();
    set.validate();
    return set;
}

void write_embf_file(const EmbeddingSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + path + " for writing");
    write_embf(set, out);
}

EmbeddingSet read_embf_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    try {
        return read_embf(in);
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

}  // namespace depprobe
