#pragma once

#include "depprobe/rng.hpp"
#include "depprobe/synthetic.hpp"
#include "depprobe/trainer.hpp"

namespace fixture {

struct PlantedSplits {
    depprobe::SyntheticSpec spec;
    depprobe::PlantedBasis basis;
    depprobe::SyntheticCorpus train, dev;
    depprobe::LabelInventory inventory;
};

inline PlantedSplits planted_splits(std::size_t train_sentences, std::size_t dev_sentences,
                                    std::uint32_t layers = 1, std::uint32_t planted = 0,
                                    std::uint64_t seed = 1) {
    PlantedSplits out;
    out.spec.layer_count = layers;
    out.spec.planted_layer = planted;
    out.spec.seed = seed;
    out.basis = depprobe::planted_basis(out.spec, seed);
    auto tr = out.spec;
    tr.sentences = train_sentences;
    tr.seed = depprobe::substream_seed(seed, 1);
    tr.id_prefix = "train";
    out.train = depprobe::generate_corpus(tr, out.basis);
    auto dv = out.spec;
    dv.sentences = dev_sentences;
    dv.seed = depprobe::substream_seed(seed, 2);
    dv.id_prefix = "dev";
    out.dev = depprobe::generate_corpus(dv, out.basis);
    out.inventory = depprobe::build_inventory(out.train.sentences);
    return out;
}

}  // namespace fixture
