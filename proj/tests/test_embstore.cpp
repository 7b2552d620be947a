#include <doctest.h>

#include <cmath>
#include <sstream>

#include "depprobe/embstore.hpp"
#include "depprobe/error.hpp"
#include "depprobe/rng.hpp"

using namespace depprobe;

namespace {

EmbeddingSet random_set(Rng& rng, std::uint32_t dim, std::uint32_t layers, bool has0, std::size_t sentences) {
    EmbeddingSet set;
    set.model_id = "test/model-" + std::to_string(rng.below(1000));
    set.dim = dim;
    set.layer_count = layers;
    set.has_layer0 = has0;
    for (std::size_t s = 0; s < sentences; ++s) {
        SentenceEmbedding e;
        e.sent_id = "s" + std::to_string(s);
        e.token_count = static_cast<std::uint32_t>(1 + rng.below(6));
        e.payload.resize(static_cast<std::size_t>(layers) * e.token_count * dim);
        for (auto& v : e.payload) v = static_cast<float>(rng.normal());
        set.sentences.push_back(std::move(e));
    }
    return set;
}

std::string serialize(const EmbeddingSet& set) {
    std::ostringstream out(std::ios::binary);
    write_embf(set, out);
    return out.str();
}

EmbeddingSet deserialize(const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    return read_embf(in);
}

}  // namespace

TEST_CASE("EMBF round trip over random shapes") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto set = random_set(rng, 1 + static_cast<std::uint32_t>(rng.below(9)),
                                    1 + static_cast<std::uint32_t>(rng.below(4)), rng.below(2) == 1,
                                    1 + rng.below(5));
        const auto bytes = serialize(set);
        const auto back = deserialize(bytes);
        CHECK(back == set);
        CHECK(serialize(back) == bytes);
    }
}

TEST_CASE("EMBF header") {
    Rng rng(5);
    const auto set = random_set(rng, 4, 3, true, 2);
    std::istringstream in(serialize(set), std::ios::binary);
    const auto h = read_embf_header(in);
    CHECK(h.version == 1);
    CHECK(h.model_id == set.model_id);
    CHECK(h.flags == 1);
    CHECK(h.layer_count == 3);
    CHECK(h.dim == 4);
    CHECK(h.sentence_count == 2);
}

TEST_CASE("EMBF rejects truncation, trailing bytes, bad magic and version") {
    Rng rng(9);
    const auto bytes = serialize(random_set(rng, 3, 2, false, 3));
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
        CAPTURE(cut);
        CHECK_THROWS_AS(deserialize(bytes.substr(0, cut)), InputError);
    }
    try {
        deserialize(bytes.substr(0, bytes.size() - 2));
        FAIL("expected truncation error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("expected") != std::string::npos);
    }
    CHECK_THROWS_AS(deserialize(bytes + "x"), InputError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize(bad_magic), InputError);
    auto bad_version = bytes;
    bad_version[4] = 2;
    CHECK_THROWS_AS(deserialize(bad_version), InputError);
}

TEST_CASE("validate catches payload size mismatch") {
    Rng rng(1);
    auto set = random_set(rng, 3, 2, false, 2);
    set.sentences[1].payload.pop_back();
    CHECK_THROWS_AS(set.validate(), InputError);
    EmbeddingSet empty;
    empty.dim = 3;
    empty.layer_count = 1;
    CHECK_THROWS_AS(empty.validate(), InputError);
}

TEST_CASE("middle layer rule") {
    // 12 transformer layers plus layer 0: transformer layer 6 is storage index 6.
    CHECK(middle_layer(13, true) == 6);
    // 32 transformer layers without layer 0: layer 16 at storage index 15.
    CHECK(middle_layer(32, false) == 15);
    CHECK(middle_layer(33, true) == 16);
    // 3 layers: ceil(3/2) = 2.
    CHECK(middle_layer(4, true) == 2);
    CHECK(middle_layer(3, false) == 1);
    CHECK(middle_layer(1, false) == 0);
}

TEST_CASE("mixable layers and uniform mixture") {
    CHECK(mixable_layers(4, true, false) == std::vector<std::uint32_t>{1, 2, 3});
    CHECK(mixable_layers(4, true, true) == std::vector<std::uint32_t>{0, 1, 2, 3});
    CHECK(mixable_layers(3, false, false) == std::vector<std::uint32_t>{0, 1, 2});
    Rng rng(2);
    const auto set = random_set(rng, 2, 4, true, 1);
    const auto mix = uniform_mix(set);
    CHECK(mix.alpha.size() == 3);
    const auto w = mixture_weights(mix.alpha);
    for (double v : w) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("mixture weights are a stable softmax") {
    const std::vector<double> alpha{1000.0, 1000.0, -1000.0};
    const auto w = mixture_weights(alpha);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.5));
    CHECK(w[2] == doctest::Approx(0.0));
}

TEST_CASE("materialize: single layer copies, mixture is the weighted sum") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const bool has0 = rng.below(2) == 1;
        const auto layers = static_cast<std::uint32_t>(2 + rng.below(4));
        const auto set = random_set(rng, 1 + static_cast<std::uint32_t>(rng.below(6)), layers, has0, 2);
        const auto k = static_cast<std::uint32_t>(rng.below(layers));
        const auto single = materialize(set, SingleLayer{k}, 1);
        CHECK(single.isApprox(set.layer(1, k).cast<double>()));

        LayerMix mix;
        mix.include_layer0 = rng.below(2) == 1;
        const auto idx = mixable_layers(layers, has0, mix.include_layer0);
        for (std::size_t i = 0; i < idx.size(); ++i) mix.alpha.push_back(rng.normal());
        const auto w = mixture_weights(mix.alpha);
        Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(single.rows(), single.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) expected += w[i] * set.layer(1, idx[i]).cast<double>();
        CHECK((materialize(set, mix, 1) - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("materialize is linear in the stored vectors") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = random_set(rng, 3, 3, false, 1);
        auto b = a;
        for (auto& v : b.sentences[0].payload) v = static_cast<float>(rng.normal());
        auto sum = a;
        for (std::size_t i = 0; i < sum.sentences[0].payload.size(); ++i) {
            sum.sentences[0].payload[i] = a.sentences[0].payload[i] + b.sentences[0].payload[i];
        }
        LayerMix mix{{rng.normal(), rng.normal(), rng.normal()}, false};
        const Eigen::MatrixXd lhs = materialize(sum, mix, 0);
        const Eigen::MatrixXd rhs = materialize(a, mix, 0) + materialize(b, mix, 0);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("layer spec checks") {
    Rng rng(4);
    const auto set = random_set(rng, 2, 3, true, 1);
    CHECK_NOTHROW(check_layer_spec(set, SingleLayer{2}));
    CHECK_THROWS_AS(check_layer_spec(set, SingleLayer{3}), InputError);
    CHECK_THROWS_AS(check_layer_spec(set, LayerMix{{0.0, 0.0, 0.0}, false}), InputError);
    CHECK_NOTHROW(check_layer_spec(set, LayerMix{{0.0, 0.0}, false}));
    CHECK_NOTHROW(check_layer_spec(set, LayerMix{{0.0, 0.0, 0.0}, true}));
}
