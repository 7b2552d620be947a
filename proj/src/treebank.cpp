#include "depprobe/treebank.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "depprobe/error.hpp"

namespace depprobe {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

std::optional<int> parse_int(std::string_view s) {
    int value = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

}  // namespace

int Sentence::root_index() const {
    for (const auto& t : tokens) {
        if (t.head == 0) return t.index;
    }
    return 0;
}

LabelInventory::LabelInventory(std::vector<std::string> labels) : labels_(std::move(labels)) {
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
    const auto it = std::find(labels_.begin(), labels_.end(), kRootLabel);
    if (it == labels_.end()) throw InputError("label inventory has no \"root\" label");
    root_id_ = static_cast<std::size_t>(it - labels_.begin());
}

std::optional<std::size_t> LabelInventory::find(std::string_view label) const {
    const auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
}

std::string coarsen_label(std::string_view deprel) {
    return std::string(deprel.substr(0, deprel.find(':')));
}

void validate_sentence(const Sentence& s) {
    const int n = static_cast<int>(s.tokens.size());
    if (n == 0) throw ValidationError(s.sent_id, "no syntactic words");
    int root = 0;
    for (int i = 0; i < n; ++i) {
        const auto& t = s.tokens[static_cast<std::size_t>(i)];
        if (t.index != i + 1) {
            throw ValidationError(s.sent_id, "token indices are not contiguous at position " +
                                                 std::to_string(i + 1));
        }
        if (t.head < 0 || t.head > n) {
            throw ValidationError(s.sent_id, "token " + std::to_string(t.index) +
                                                 " has dangling head " + std::to_string(t.head));
        }
        if (t.head == t.index) {
            throw ValidationError(s.sent_id, "token " + std::to_string(t.index) + " heads itself");
        }
        if (t.head == 0) {
            if (root != 0) {
                throw ValidationError(s.sent_id, "multiple roots (tokens " + std::to_string(root) +
                                                     " and " + std::to_string(t.index) + ")");
            }
            root = t.index;
            if (t.deprel != kRootLabel) {
                throw ValidationError(s.sent_id, "root token " + std::to_string(t.index) +
                                                     " has deprel '" + t.deprel + "'");
            }
        } else if (t.deprel == kRootLabel) {
            throw ValidationError(s.sent_id,
                                  "non-root token " + std::to_string(t.index) + " labeled root");
        }
    }
    if (root == 0) throw ValidationError(s.sent_id, "no root (head cycle)");

    // Every token must reach the root by following heads.
    std::vector<int> state(static_cast<std::size_t>(n) + 1, 0);  // 0 new, 1 on path, 2 done
    state[0] = 2;
    for (int start = 1; start <= n; ++start) {
        std::vector<int> path;
        int cur = start;
        while (state[static_cast<std::size_t>(cur)] == 0) {
            state[static_cast<std::size_t>(cur)] = 1;
            path.push_back(cur);
            cur = s.tokens[static_cast<std::size_t>(cur - 1)].head;
        }
        if (state[static_cast<std::size_t>(cur)] == 1) {
            throw ValidationError(s.sent_id, "head cycle through token " + std::to_string(cur));
        }
        for (int v : path) state[static_cast<std::size_t>(v)] = 2;
    }
}

std::vector<Sentence> parse_conllu(std::string_view text, const ParseOptions& options) {
    std::vector<Sentence> out;
    Sentence current;
    std::optional<std::string> pending_id;
    bool in_sentence = false;
    std::size_t line_no = 0;

    auto finish = [&]() {
        if (!in_sentence) return;
        if (current.tokens.empty()) {
            // Sentence made only of skipped lines.
            current = Sentence{};
            pending_id.reset();
            in_sentence = false;
            return;
        }
        current.sent_id = pending_id ? *pending_id : "s" + std::to_string(out.size() + 1);
        validate_sentence(current);
        out.push_back(std::move(current));
        current = Sentence{};
        pending_id.reset();
        in_sentence = false;
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (trim(line).empty()) {
            finish();
            if (nl == text.size()) break;
            continue;
        }
        in_sentence = true;
        if (line.front() == '#') {
            auto body = trim(line.substr(1));
            if (body.starts_with("sent_id")) {
                auto rest = trim(body.substr(7));
                if (!rest.empty() && rest.front() == '=') {
                    pending_id = std::string(trim(rest.substr(1)));
                }
            }
            continue;
        }

        const auto fields = split_tabs(line);
        if (fields.size() != 10) {
            throw ParseError("expected 10 tab-separated columns, found " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        const auto id = fields[0];
        if (id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos) {
            continue;
        }
        const auto index = parse_int(id);
        if (!index || *index < 1) throw ParseError("bad token ID '" + std::string(id) + "'", line_no);
        const auto head = parse_int(fields[6]);
        if (!head || *head < 0) {
            throw ParseError("bad HEAD '" + std::string(fields[6]) + "'", line_no);
        }
        Token t;
        t.index = *index;
        t.form = std::string(fields[1]);
        t.upos = std::string(fields[3]);
        t.head = *head;
        t.deprel = options.coarse_labels ? coarsen_label(fields[7]) : std::string(fields[7]);
        current.tokens.push_back(std::move(t));
        if (nl == text.size()) break;
    }
    finish();

    if (out.empty()) throw InputError("no sentences in CoNLL-U input");
    return out;
}

std::vector<Sentence> read_conllu_file(const std::string& path, const ParseOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_conllu(buf.str(), options);
    } catch (const ParseError& e) {
        throw InputError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(e.sent_id(), std::string(e.what()) + " [" + path + "]");
    }
}

GoldTree tree_distances(const Sentence& s) {
    const auto n = s.tokens.size();
    GoldTree tree;
    tree.root_index = s.root_index();
    tree.labels.reserve(n);
    std::vector<std::vector<int>> adj(n);
    for (const auto& t : s.tokens) {
        tree.labels.push_back(t.deprel);
        if (t.head != 0) {
            tree.edge_set.push_back(make_edge(t.index, t.head));
            adj[static_cast<std::size_t>(t.index - 1)].push_back(t.head - 1);
            adj[static_cast<std::size_t>(t.head - 1)].push_back(t.index - 1);
        }
    }
    std::sort(tree.edge_set.begin(), tree.edge_set.end());

    tree.distances.assign(n, std::vector<int>(n, -1));
    for (std::size_t src = 0; src < n; ++src) {
        auto& row = tree.distances[src];
        std::deque<int> queue{static_cast<int>(src)};
        row[src] = 0;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int v : adj[static_cast<std::size_t>(u)]) {
                if (row[static_cast<std::size_t>(v)] < 0) {
                    row[static_cast<std::size_t>(v)] = row[static_cast<std::size_t>(u)] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    return tree;
}

LabelInventory build_inventory(const std::vector<Sentence>& train) {
    if (train.empty()) throw InputError("cannot build a label inventory from no sentences");
    std::set<std::string> seen;
    for (const auto& s : train) {
        for (const auto& t : s.tokens) seen.insert(t.deprel);
    }
    return LabelInventory(std::vector<std::string>(seen.begin(), seen.end()));
}

std::string write_conllu(const std::vector<Sentence>& sentences) {
    std::string out;
    auto field = [](const std::string& v) -> const std::string& {
        static const std::string underscore = "_";
        return v.empty() ? underscore : v;
    };
    for (const auto& s : sentences) {
        out += "# sent_id = " + s.sent_id + "\n";
        for (const auto& t : s.tokens) {
            out += std::to_string(t.index);
            out += '\t';
            out += field(t.form);
            out += "\t_\t";
            out += field(t.upos);
            out += "\t_\t_\t";
            out += std::to_string(t.head);
            out += '\t';
            out += field(t.deprel);
            out += "\t_\t_\n";
        }
        out += '\n';
    }
    return out;
}

}  // namespace depprobe
