#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace depprobe {

using MatrixXfRow = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Embeddings of one sentence: layer_count x token_count x dim, layer-major.
struct SentenceEmbedding {
    std::string sent_id;
    std::uint32_t token_count = 0;
    std::vector<float> payload;

    bool operator==(const SentenceEmbedding&) const = default;
};

struct EmbeddingSet {
    std::string model_id;
    std::uint32_t dim = 0;
    std::uint32_t layer_count = 0;
    bool has_layer0 = false;  // storage index 0 is the pre-transformer embedding output
    std::vector<SentenceEmbedding> sentences;

    // token_count x dim view of one stored layer.
    Eigen::Map<const MatrixXfRow> layer(std::size_t sentence, std::size_t layer) const;

    // Throws InputError on shape violations.
    void validate() const;

    bool operator==(const EmbeddingSet&) const = default;
};

struct SingleLayer {
    std::uint32_t index = 0;
    bool operator==(const SingleLayer&) const = default;
};

struct LayerMix {
    std::vector<double> alpha;  // raw, pre-softmax; one per mixable layer
    bool include_layer0 = false;
    bool operator==(const LayerMix&) const = default;
};

using LayerSpec = std::variant<SingleLayer, LayerMix>;

inline bool is_mix(const LayerSpec& spec) { return std::holds_alternative<LayerMix>(spec); }

// Storage indices that take part in a mixture.
std::vector<std::uint32_t> mixable_layers(std::uint32_t layer_count, bool has_layer0,
                                          bool include_layer0);

// Uniform (alpha = 0) mixture over the mixable layers of `set`.
LayerMix uniform_mix(const EmbeddingSet& set, bool include_layer0 = false);

// Numerically stable softmax.
std::vector<double> mixture_weights(std::span<const double> alpha);

// Throws InputError if `spec` does not fit `set`.
void check_layer_spec(const EmbeddingSet& set, const LayerSpec& spec);

// token_count x dim representation of one sentence under `spec`.
Eigen::MatrixXd materialize(const EmbeddingSet& set, const LayerSpec& spec, std::size_t sentence);

// Storage index of transformer layer ceil(N/2).
std::uint32_t middle_layer(std::uint32_t layer_count_stored, bool has_layer0);

std::uint64_t write_embf(const EmbeddingSet& set, std::ostream& out);
EmbeddingSet read_embf(std::istream& in);

void write_embf_file(const EmbeddingSet& set, const std::string& path);
EmbeddingSet read_embf_file(const std::string& path);

struct EmbfHeader {
    std::uint32_t version = 0;
    std::string model_id;
    std::uint32_t flags = 0;
    std::uint32_t layer_count = 0;
    std::uint32_t dim = 0;
    std::uint32_t sentence_count = 0;
};

EmbfHeader read_embf_header(std::istream& in);

}  // namespace depprobe
