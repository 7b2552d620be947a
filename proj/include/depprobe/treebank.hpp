#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace depprobe {

inline constexpr std::string_view kRootLabel = "root";

struct Token {
    int index = 0;  // 1-based among syntactic words
    std::string form;
    std::string upos;
    int head = 0;  // 0 = artificial root
    std::string deprel;
};

struct Sentence {
    std::string sent_id;
    std::vector<Token> tokens;

    std::size_t size() const { return tokens.size(); }
    // 1-based index of the token attached to the artificial root.
    int root_index() const;
};

// Undirected edge between two 1-based token positions, stored low-high.
using Edge = std::pair<int, int>;

inline Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

struct GoldTree {
    // distances[i][j] is the path length between tokens i+1 and j+1.
    std::vector<std::vector<int>> distances;
    int root_index = 0;
    std::vector<Edge> edge_set;  // sorted
    std::vector<std::string> labels;

    std::size_t size() const { return labels.size(); }
};

class LabelInventory {
public:
    LabelInventory() = default;
    // Sorts and deduplicates; throws InputError if "root" is missing.
    explicit LabelInventory(std::vector<std::string> labels);

    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t size() const { return labels_.size(); }
    std::size_t root_id() const { return root_id_; }
    const std::string& label(std::size_t id) const { return labels_.at(id); }
    std::optional<std::size_t> find(std::string_view label) const;

    bool operator==(const LabelInventory&) const = default;

private:
    std::vector<std::string> labels_;
    std::size_t root_id_ = 0;
};

struct ParseOptions {
    // Strip relation subtypes ("nsubj:pass" -> "nsubj").
    bool coarse_labels = false;
};

// Parses a CoNLL-U document. Multiword ranges and empty nodes are skipped.
// Throws ParseError, ValidationError or InputError (no sentences).
std::vector<Sentence> parse_conllu(std::string_view text, const ParseOptions& options = {});
std::vector<Sentence> read_conllu_file(const std::string& path, const ParseOptions& options = {});

// Throws ValidationError unless heads form a single rooted tree.
void validate_sentence(const Sentence& sentence);

GoldTree tree_distances(const Sentence& sentence);

LabelInventory build_inventory(const std::vector<Sentence>& train);

// Writes ID, FORM, UPOS, HEAD, DEPREL; every other column is "_".
std::string write_conllu(const std::vector<Sentence>& sentences);

std::string coarsen_label(std::string_view deprel);

}  // namespace depprobe
