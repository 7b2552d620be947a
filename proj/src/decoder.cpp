#include "depprobe/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "depprobe/error.hpp"

namespace depprobe {

std::vector<Edge> mst(const Eigen::MatrixXd& distances) {
    const auto n = distances.rows();
    if (distances.cols() != n) throw InputError("mst: distance matrix is not square");
    if (!distances.allFinite()) throw NumericError("mst: non-finite distance");
    std::vector<Edge> edges;
    if (n <= 1) return edges;

    // Candidate connection of each outside vertex: (weight, edge).
    struct Candidate {
        double weight = std::numeric_limits<double>::infinity();
        Edge edge{0, 0};
    };
    auto better = [](double w, const Edge& e, const Candidate& c) {
        return w < c.weight || (w == c.weight && e < c.edge);
    };

    std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
    std::vector<Candidate> best(static_cast<std::size_t>(n));
    in_tree[0] = true;
    for (Eigen::Index v = 1; v < n; ++v) {
        best[static_cast<std::size_t>(v)] = {distances(0, v), make_edge(1, static_cast<int>(v) + 1)};
    }
    edges.reserve(static_cast<std::size_t>(n - 1));
    for (Eigen::Index step = 1; step < n; ++step) {
        Eigen::Index pick = -1;
        for (Eigen::Index v = 0; v < n; ++v) {
            if (in_tree[static_cast<std::size_t>(v)]) continue;
            const auto& c = best[static_cast<std::size_t>(v)];
            if (pick < 0 || better(c.weight, c.edge, best[static_cast<std::size_t>(pick)])) pick = v;
        }
        in_tree[static_cast<std::size_t>(pick)] = true;
        edges.push_back(best[static_cast<std::size_t>(pick)].edge);
        for (Eigen::Index v = 0; v < n; ++v) {
            if (in_tree[static_cast<std::size_t>(v)]) continue;
            const Edge e = make_edge(static_cast<int>(pick) + 1, static_cast<int>(v) + 1);
            if (better(distances(pick, v), e, best[static_cast<std::size_t>(v)])) {
                best[static_cast<std::size_t>(v)] = {distances(pick, v), e};
            }
        }
    }
    std::sort(edges.begin(), edges.end());
    return edges;
}

int select_root(const Eigen::MatrixXd& logits, const LabelInventory& inventory) {
    if (logits.rows() == 0) throw InputError("select_root: empty sentence");
    if (static_cast<std::size_t>(logits.cols()) != inventory.size()) {
        throw InputError("select_root: logits do not match the label inventory");
    }
    const auto root_id = static_cast<Eigen::Index>(inventory.root_id());
    int best = 1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double top = logits.row(i).maxCoeff();
        const double lse = top + std::log((logits.row(i).array() - top).exp().sum());
        const double score = logits(i, root_id) - lse;  // log p(root)
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(i) + 1;
        }
    }
    return best;
}

PredictedTree orient_and_label(const std::vector<Edge>& edges, int root,
                               const Eigen::MatrixXd& logits, const LabelInventory& inventory) {
    const auto n = static_cast<int>(logits.rows());
    if (root < 1 || root > n) throw InputError("orient_and_label: root out of range");
    if (static_cast<std::size_t>(logits.cols()) != inventory.size()) {
        throw InputError("orient_and_label: logits do not match the label inventory");
    }
    if (n > 1 && inventory.size() < 2) {
        throw InputError("orient_and_label: no non-root label available");
    }
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n) + 1);
    for (const auto& [a, b] : edges) {
        if (a < 1 || b < 1 || a > n || b > n) throw InputError("orient_and_label: edge out of range");
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    }

    PredictedTree tree;
    tree.root_index = root;
    tree.heads.assign(static_cast<std::size_t>(n), -1);
    tree.labels.assign(static_cast<std::size_t>(n), std::string());
    tree.heads[static_cast<std::size_t>(root - 1)] = 0;
    std::deque<int> queue{root};
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (tree.heads[static_cast<std::size_t>(v - 1)] != -1) continue;
            tree.heads[static_cast<std::size_t>(v - 1)] = u;
            queue.push_back(v);
        }
    }
    const auto root_id = static_cast<Eigen::Index>(inventory.root_id());
    for (int i = 1; i <= n; ++i) {
        if (tree.heads[static_cast<std::size_t>(i - 1)] == -1) {
            throw InputError("orient_and_label: token " + std::to_string(i) +
                             " is not connected to the root");
        }
        if (i == root) {
            tree.labels[static_cast<std::size_t>(i - 1)] = std::string(kRootLabel);
            continue;
        }
        Eigen::Index best = -1;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            if (c == root_id) continue;
            if (best < 0 || logits(i - 1, c) > logits(i - 1, best)) best = c;
        }
        tree.labels[static_cast<std::size_t>(i - 1)] = inventory.label(static_cast<std::size_t>(best));
    }
    if (edges.size() != static_cast<std::size_t>(n - 1)) {
        throw InputError("orient_and_label: expected " + std::to_string(n - 1) + " edges, got " +
                         std::to_string(edges.size()));
    }
    return tree;
}

PredictedTree decode(const ProbeParams& params, const Eigen::MatrixXd& h, DistanceMode mode) {
    const auto distances = structural_distance(params, h, mode);
    const auto edges = mst(distances);
    const auto logits = relational_logits(params, h);
    const int root = select_root(logits, params.inventory);
    return orient_and_label(edges, root, logits, params.inventory);
}

Sentence to_sentence(const Sentence& source, const PredictedTree& tree) {
    if (source.size() != tree.size()) {
        throw InputError("sentence '" + source.sent_id + "': prediction has " +
                         std::to_string(tree.size()) + " tokens, expected " +
                         std::to_string(source.size()));
    }
    Sentence out;
    out.sent_id = source.sent_id;
    for (std::size_t i = 0; i < source.size(); ++i) {
        Token t;
        t.index = source.tokens[i].index;
        t.form = source.tokens[i].form;
        t.head = tree.heads[i];
        t.deprel = tree.labels[i];
        out.tokens.push_back(std::move(t));
    }
    return out;
}

void check_predicted_tree(const PredictedTree& tree) {
    Sentence s;
    s.sent_id = "prediction";
    for (std::size_t i = 0; i < tree.size(); ++i) {
        s.tokens.push_back({static_cast<int>(i) + 1, "", "", tree.heads[i], tree.labels[i]});
    }
    try {
        validate_sentence(s);
    } catch (const ValidationError& e) {
        throw InputError(std::string("malformed predicted tree: ") + e.what());
    }
    if (s.root_index() != tree.root_index) throw InputError("predicted root index mismatch");
}

}  // namespace depprobe
