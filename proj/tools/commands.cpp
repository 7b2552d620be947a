#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "depprobe/decoder.hpp"
#include "depprobe/embstore.hpp"
#include "depprobe/error.hpp"
#include "depprobe/layer_scan.hpp"
#include "depprobe/metrics.hpp"
#include "depprobe/probe.hpp"
#include "depprobe/ranking.hpp"
#include "depprobe/rng.hpp"
#include "depprobe/synthetic.hpp"
#include "depprobe/trainer.hpp"
#include "depprobe/treebank.hpp"

#ifndef DEPPROBE_VERSION
#define DEPPROBE_VERSION "0.0.0"
#endif

namespace depprobe::cli {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string tool_version() { return DEPPROBE_VERSION; }

namespace {

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
    std::string s;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(seeds[i]);
    }
    return s;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

void RunManifest::write(std::ostream& out, bool with_timings) const {
    out << "command=" << command << "\n";
    out << "version=" << tool_version() << "\n";
    for (const auto& [k, v] : inputs) out << "input." << k << "=" << v << "\n";
    for (const auto& [k, v] : config) out << "config." << k << "=" << v << "\n";
    if (!seeds.empty()) out << "seeds=" << join_seeds(seeds) << "\n";
    for (const auto& [k, v] : outputs) out << "output." << k << "=" << v << "\n";
    if (with_timings) {
        for (const auto& [k, v] : timings) out << "timing." << k << "=" << fmt_double(v) << "\n";
    }
}

void RunManifest::write_comment(std::ostream& out) const {
    std::ostringstream body;
    write(body, false);
    std::istringstream lines(body.str());
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << "\n";
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    std::vector<std::exception_ptr> errors(count);
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        task(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : workers) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

namespace {

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path);
    f << text;
    if (!f) throw InputError("failed writing " + path);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create directory " + dir + ": " + ec.message());
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

LayerSpec parse_layer(const std::string& text, const EmbeddingSet& set, bool include_layer0) {
    if (text == "mid") return SingleLayer{middle_layer(set.layer_count, set.has_layer0)};
    if (text == "mix") return uniform_mix(set, include_layer0);
    std::uint32_t index = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), index);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw InputError("--layer expects 'mid', 'mix' or a layer index, got '" + text + "'");
    }
    return SingleLayer{index};
}

std::string describe_layer(const LayerSpec& spec) {
    if (const auto* s = std::get_if<SingleLayer>(&spec)) return std::to_string(s->index);
    const auto& mix = std::get<LayerMix>(spec);
    return std::string("mix(") + std::to_string(mix.alpha.size()) +
           (mix.include_layer0 ? " layers, with layer 0)" : " layers)");
}

void check_compatible(const EmbeddingSet& train, const EmbeddingSet& dev) {
    if (train.dim != dev.dim || train.layer_count != dev.layer_count || train.has_layer0 != dev.has_layer0) {
        throw InputError("train and dev embeddings differ in shape (dim " + std::to_string(train.dim) + "/" +
                         std::to_string(dev.dim) + ", layers " + std::to_string(train.layer_count) + "/" +
                         std::to_string(dev.layer_count) + ")");
    }
}

// Options shared by commands that train probes.
struct TrainFlags {
    std::string train_conllu, train_emb, dev_conllu, dev_emb;
    std::size_t rank = 128;
    std::string layer = "mid";
    bool include_layer0 = false;
    std::vector<std::uint64_t> seeds;
    std::size_t jobs = 1;
    std::string distance = "l2";
    bool ignore_punct = false;
    bool coarse_labels = false;
    std::size_t max_epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::string out_dir;
};

void add_train_flags(CLI::App* app, TrainFlags& f, bool with_layer) {
    app->add_option("--train", f.train_conllu, "training treebank (CoNLL-U)")->required();
    app->add_option("--emb", f.train_emb, "training embeddings (EMBF)")->required();
    app->add_option("--dev", f.dev_conllu, "development treebank (CoNLL-U)")->required();
    app->add_option("--dev-emb", f.dev_emb, "development embeddings (EMBF)")->required();
    app->add_option("--rank", f.rank, "structural rank b")->capture_default_str();
    if (with_layer) {
        app->add_option("--layer", f.layer, "mid, mix or a stored layer index")->capture_default_str();
        app->add_flag("--include-layer0", f.include_layer0, "let a mixture use layer 0");
    }
    app->add_option("--seeds", f.seeds, "comma-separated seeds")->delimiter(',');
    app->add_option("--jobs", f.jobs, "parallel jobs")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--distance", f.distance, "l2 or squared")->capture_default_str();
    app->add_flag("--ignore-punct", f.ignore_punct, "skip PUNCT tokens when scoring");
    app->add_flag("--coarse-labels", f.coarse_labels, "strip relation subtypes");
    app->add_option("--max-epochs", f.max_epochs, "epoch limit")->capture_default_str();
    app->add_option("--batch-size", f.batch_size, "sentences per batch")->capture_default_str();
    app->add_option("--lr", f.learning_rate, "initial learning rate")->capture_default_str();
}

void fill_manifest(RunManifest& m, const TrainFlags& f) {
    m.inputs = {{"train", f.train_conllu}, {"emb", f.train_emb}, {"dev", f.dev_conllu}, {"dev_emb", f.dev_emb}};
    m.config = {{"rank", std::to_string(f.rank)},
                {"distance", f.distance},
                {"ignore_punct", f.ignore_punct ? "1" : "0"},
                {"coarse_labels", f.coarse_labels ? "1" : "0"},
                {"max_epochs", std::to_string(f.max_epochs)},
                {"batch_size", std::to_string(f.batch_size)},
                {"learning_rate", fmt_double(f.learning_rate)},
                {"jobs", std::to_string(f.jobs)}};
    m.seeds = f.seeds;
}

struct LoadedData {
    std::vector<Sentence> train_sentences, dev_sentences;
    EmbeddingSet train_emb, dev_emb;
    LabelInventory inventory;
};

LoadedData load_data(const TrainFlags& f) {
    LoadedData d;
    const ParseOptions opts{f.coarse_labels};
    d.train_sentences = read_conllu_file(f.train_conllu, opts);
    d.dev_sentences = read_conllu_file(f.dev_conllu, opts);
    d.train_emb = read_embf_file(f.train_emb);
    d.dev_emb = read_embf_file(f.dev_emb);
    check_compatible(d.train_emb, d.dev_emb);
    d.inventory = build_inventory(d.train_sentences);
    return d;
}

ProbeConfig make_config(const TrainFlags& f, const LayerSpec& layer, std::uint64_t seed) {
    ProbeConfig c;
    c.rank = f.rank;
    c.layer_spec = layer;
    c.learning_rate = f.learning_rate;
    c.batch_size = f.batch_size;
    c.max_epochs = f.max_epochs;
    c.seed = seed;
    c.distance_mode = parse_distance_mode(f.distance);
    return c;
}

// Trains one probe and scores it on dev after a round trip through DPRB, so
// the numbers match what `evaluate` reports for the written file.
struct SeedRun {
    ProbeParams params;
    TrainingLog log;
    ScoreReport report;
};

SeedRun train_and_score(const ProbeConfig& config, const LoadedData& data, bool ignore_punct) {
    config.validate(data.train_emb.dim);
    check_layer_spec(data.train_emb, config.layer_spec);
    auto train_ex = build_examples(data.train_sentences, data.train_emb, data.inventory, config.layer_spec, true);
    auto dev_ex = build_examples(data.dev_sentences, data.dev_emb, data.inventory, config.layer_spec, false);
    auto result = train(config, std::move(train_ex), dev_ex, data.inventory);

    std::stringstream buf;
    write_dprb(result.params, buf);
    SeedRun run;
    run.params = read_dprb(buf);
    run.log = std::move(result.log);
    if (is_mix(config.layer_spec)) {
        dev_ex = build_examples(data.dev_sentences, data.dev_emb, data.inventory, run.params.layer_spec, false);
    }
    run.report = evaluate(run.params, dev_ex, data.dev_sentences, ignore_punct, config.distance_mode);
    run.report.seed = config.seed;
    return run;
}

// ---------------------------------------------------------------- train

int cmd_train(TrainFlags& f, const std::vector<std::string>& args, std::ostream& out) {
    const auto start = Clock::now();
    if (f.seeds.empty()) f.seeds.assign(kDefaultSeeds.begin(), kDefaultSeeds.end());
    if (f.out_dir.empty()) throw InputError("train: --out is required");
    const auto data = load_data(f);
    const auto layer = parse_layer(f.layer, data.train_emb, f.include_layer0);
    check_layer_spec(data.train_emb, layer);
    ensure_dir(f.out_dir);

    std::vector<SeedRun> runs(f.seeds.size());
    std::vector<double> seconds(f.seeds.size());
    parallel_for(f.seeds.size(), f.jobs, [&](std::size_t i) {
        const auto t0 = Clock::now();
        runs[i] = train_and_score(make_config(f, layer, f.seeds[i]), data, f.ignore_punct);
        seconds[i] = seconds_since(t0);
    });

    RunManifest m;
    m.command = [&] {
        std::string s;
        for (const auto& a : args) s += (s.empty() ? "" : " ") + a;
        return s;
    }();
    fill_manifest(m, f);
    m.config.emplace_back("layer", describe_layer(layer));
    m.config.emplace_back("include_layer0", f.include_layer0 ? "1" : "0");

    std::vector<ScoreReport> reports;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto seed = std::to_string(f.seeds[i]);
        const auto probe_path = path_in(f.out_dir, "probe-seed" + seed + ".dprb");
        const auto log_path = path_in(f.out_dir, "train-log-seed" + seed + ".txt");
        write_dprb_file(runs[i].params, probe_path);
        std::ostringstream log;
        write_training_log(runs[i].log, log);
        write_text_file(log_path, log.str());
        m.outputs.emplace_back("probe." + seed, probe_path);
        m.outputs.emplace_back("log." + seed, log_path);
        m.timings.emplace_back("seed." + seed + "_seconds", seconds[i]);
        reports.push_back(runs[i].report);
    }
    const auto summary = aggregate(reports);
    const auto report_path = path_in(f.out_dir, "report.txt");
    const auto manifest_path = path_in(f.out_dir, "manifest.txt");
    m.outputs.emplace_back("report", report_path);
    m.outputs.emplace_back("manifest", manifest_path);

    std::ostringstream report;
    m.write_comment(report);
    report << "layer=" << describe_layer(layer) << "\n";
    report << "trainable_parameters=" << runs.front().params.trainable_parameter_count() << "\n";
    write_report(summary, report);
    write_text_file(report_path, report.str());

    print_report_table(summary, out);
    out << "trainable parameters: " << runs.front().params.trainable_parameter_count() << "\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (const auto* mix = std::get_if<LayerMix>(&runs[i].params.layer_spec)) {
            const auto w = mixture_weights(mix->alpha);
            const auto layers = mixable_layers(data.train_emb.layer_count, data.train_emb.has_layer0,
                                               mix->include_layer0);
            out << "seed " << f.seeds[i] << " mixture weights:";
            char buf[48];
            for (std::size_t k = 0; k < w.size(); ++k) {
                std::snprintf(buf, sizeof buf, " %u:%.3f", layers[k], w[k]);
                out << buf;
            }
            out << "\n";
        }
    }
    out << "wrote " << report_path << "\n";

    m.timings.emplace_back("total_seconds", seconds_since(start));
    std::ostringstream manifest;
    m.write(manifest, true);
    write_text_file(manifest_path, manifest.str());
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvalFlags {
    std::vector<std::string> probes;
    std::string conllu, emb, distance = "l2", report;
    bool ignore_punct = false;
    bool coarse_labels = false;
};

int cmd_evaluate(const EvalFlags& f, std::ostream& out) {
    const auto sentences = read_conllu_file(f.conllu, ParseOptions{f.coarse_labels});
    const auto emb = read_embf_file(f.emb);
    const auto mode = parse_distance_mode(f.distance);
    std::vector<ScoreReport> reports;
    for (std::size_t i = 0; i < f.probes.size(); ++i) {
        const auto params = read_dprb_file(f.probes[i]);
        if (params.dim() != emb.dim) {
            throw InputError(f.probes[i] + ": probe expects dim " + std::to_string(params.dim()) +
                             ", embeddings have " + std::to_string(emb.dim));
        }
        check_layer_spec(emb, params.layer_spec);
        const auto ex = build_examples(sentences, emb, params.inventory, params.layer_spec, false);
        auto r = evaluate(params, ex, sentences, f.ignore_punct, mode);
        r.seed = i + 1;
        reports.push_back(r);
    }
    const auto summary = reports.size() == 1 ? reports.front() : aggregate(reports);
    print_report_table(summary, out);
    if (!f.report.empty()) {
        RunManifest m;
        m.command = "evaluate";
        for (std::size_t i = 0; i < f.probes.size(); ++i) m.inputs.emplace_back("probe." + std::to_string(i + 1), f.probes[i]);
        m.inputs.emplace_back("conllu", f.conllu);
        m.inputs.emplace_back("emb", f.emb);
        m.config = {{"distance", f.distance}, {"ignore_punct", f.ignore_punct ? "1" : "0"},
                    {"coarse_labels", f.coarse_labels ? "1" : "0"}};
        m.outputs.emplace_back("report", f.report);
        std::ostringstream report;
        m.write_comment(report);
        write_report(summary, report);
        write_text_file(f.report, report.str());
    }
    return kExitOk;
}

// ---------------------------------------------------------------- decode

struct DecodeFlags {
    std::string probe, conllu, emb, distance = "l2", out;
    bool coarse_labels = false;
};

int cmd_decode(const DecodeFlags& f, std::ostream& out) {
    const auto start = Clock::now();
    const auto sentences = read_conllu_file(f.conllu, ParseOptions{f.coarse_labels});
    const auto emb = read_embf_file(f.emb);
    const auto params = read_dprb_file(f.probe);
    const auto mode = parse_distance_mode(f.distance);
    check_layer_spec(emb, params.layer_spec);
    const auto ex = build_examples(sentences, emb, params.inventory, params.layer_spec, false);
    std::vector<Sentence> predicted;
    predicted.reserve(sentences.size());
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        const auto tree = decode(params, representation(params, ex[s]), mode);
        predicted.push_back(to_sentence(sentences[s], tree));
    }
    const auto text = write_conllu(predicted);
    if (f.out.empty()) {
        out << text;
        return kExitOk;
    }
    write_text_file(f.out, text);
    RunManifest m;
    m.command = "decode";
    m.inputs = {{"probe", f.probe}, {"conllu", f.conllu}, {"emb", f.emb}};
    m.config = {{"distance", f.distance}, {"coarse_labels", f.coarse_labels ? "1" : "0"}};
    m.outputs = {{"conllu", f.out}};
    m.timings.emplace_back("total_seconds", seconds_since(start));
    std::ostringstream manifest;
    m.write(manifest, true);
    write_text_file(f.out + ".manifest.txt", manifest.str());
    out << "wrote " << predicted.size() << " sentences to " << f.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- layer-scan

struct ScanFlags {
    TrainFlags train;
    std::vector<std::uint32_t> layers;
    std::string csv;
    std::string from_csv;
};

int cmd_layer_scan(ScanFlags& f, std::ostream& out) {
    std::vector<LayerScanRow> rows;
    if (!f.from_csv.empty()) {
        std::ifstream in(f.from_csv, std::ios::binary);
        if (!in) throw InputError("cannot open " + f.from_csv);
        std::stringstream buf;
        buf << in.rdbuf();
        rows = parse_layer_scan_csv(buf.str());
        print_layer_scan_table(rows, out);
        return kExitOk;
    }
    const auto start = Clock::now();
    auto& t = f.train;
    if (t.seeds.empty()) t.seeds = {kDefaultSeeds[0]};
    const auto data = load_data(t);
    auto layers = f.layers;
    if (layers.empty()) {
        for (std::uint32_t k = 0; k < data.train_emb.layer_count; ++k) layers.push_back(k);
    }
    for (auto k : layers) check_layer_spec(data.train_emb, SingleLayer{k});

    // One job per (layer, seed) cell.
    const auto cells = layers.size() * t.seeds.size();
    std::vector<ScoreReport> results(cells);
    parallel_for(cells, t.jobs, [&](std::size_t c) {
        const auto layer = layers[c / t.seeds.size()];
        const auto seed = t.seeds[c % t.seeds.size()];
        results[c] = train_and_score(make_config(t, SingleLayer{layer}, seed), data, t.ignore_punct).report;
    });
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto first = results.begin() + static_cast<std::ptrdiff_t>(li * t.seeds.size());
        const std::vector<ScoreReport> cell(first, first + static_cast<std::ptrdiff_t>(t.seeds.size()));
        const auto agg = aggregate(cell);
        rows.push_back({layers[li], agg.uuas, agg.relacc, agg.las});
    }
    print_layer_scan_table(rows, out);

    RunManifest m;
    m.command = "layer-scan";
    fill_manifest(m, t);
    {
        std::string s;
        for (auto k : layers) s += (s.empty() ? "" : ",") + std::to_string(k);
        m.config.emplace_back("layers", s);
    }
    if (!f.csv.empty()) {
        m.outputs.emplace_back("csv", f.csv);
        std::ostringstream text;
        m.write_comment(text);
        write_layer_scan_csv(rows, text);
        write_text_file(f.csv, text.str());
        m.timings.emplace_back("total_seconds", seconds_since(start));
        std::ostringstream manifest;
        m.write(manifest, true);
        write_text_file(f.csv + ".manifest.txt", manifest.str());
    } else {
        m.write_comment(out);
        write_layer_scan_csv(rows, out);
    }
    return kExitOk;
}

// ---------------------------------------------------------------- rank

struct RankFlags {
    std::string scores;
    std::vector<std::string> exclude;
    std::size_t permutations = 10000;
    std::uint64_t seed = 692;
    std::string out, points;
    bool per_language = false;
};

int cmd_rank(const RankFlags& f, std::ostream& out) {
    const auto records = read_scores_csv(f.scores);
    const auto filter = RecordFilter::parse(f.exclude);
    const auto result = rank_setups(records, filter, RankOptions{f.permutations, f.seed});

    char buf[160];
    std::snprintf(buf, sizeof buf, "setups   %zu (%s)\n", result.n, result.filter_description.c_str());
    out << buf;
    std::snprintf(buf, sizeof buf, "rho      %.3f  (p = %.3g)\n", result.rho, result.rho_p);
    out << buf;
    std::snprintf(buf, sizeof buf, "tau_w    %.3f  (p = %.3g)\n", result.tau_w, result.tau_p);
    out << buf;
    std::snprintf(buf, sizeof buf, "choice   %.1f%%\n", 100.0 * result.choice_probability);
    out << buf;

    std::vector<SetupRecord> kept;
    for (const auto& r : records) {
        if (!filter.excludes(r)) kept.push_back(r);
    }
    if (f.per_language) {
        out << "\nbest probe per language:\n";
        for (const auto& [language, ranked] : best_per_language(kept)) {
            const auto& top = ranked.front();
            std::snprintf(buf, sizeof buf, "  %-16s %-40s %5.1f  (downstream %.1f)\n", language.c_str(),
                          top.model_id.c_str(), top.probe_score, top.downstream_score);
            out << buf;
        }
    }

    RunManifest m;
    m.command = "rank";
    m.inputs = {{"scores", f.scores}};
    m.config = {{"exclude", result.filter_description},
                {"permutations", std::to_string(f.permutations)},
                {"seed", std::to_string(f.seed)}};
    if (!f.out.empty()) {
        m.outputs.emplace_back("result", f.out);
        std::ostringstream text;
        m.write_comment(text);
        write_ranking_result(result, text);
        write_text_file(f.out, text.str());
    }
    if (!f.points.empty()) {
        std::ostringstream text;
        m.write_comment(text);
        text << "setup_id,language,probe_score,downstream_score\n";
        for (const auto& r : kept) {
            text << r.setup_id << "," << r.language << "," << fmt_double(r.probe_score) << ","
                 << fmt_double(r.downstream_score) << "\n";
        }
        write_text_file(f.points, text.str());
    }
    return kExitOk;
}

// ---------------------------------------------------------------- inspect

int cmd_inspect(const std::string& path, std::ostream& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4) throw InputError(path + ": too short to hold a file header");
    in.seekg(0);
    const std::string tag(magic, 4);
    if (tag == "EMBF") {
        const auto h = read_embf_header(in);
        out << "format=EMBF\n"
            << "version=" << h.version << "\n"
            << "model_id=" << h.model_id << "\n"
            << "flags=" << h.flags << "\n"
            << "has_layer0=" << ((h.flags & 1u) ? 1 : 0) << "\n"
            << "layer_count=" << h.layer_count << "\n"
            << "dim=" << h.dim << "\n"
            << "sentence_count=" << h.sentence_count << "\n";
        if (h.layer_count > 0) out << "middle_layer=" << middle_layer(h.layer_count, (h.flags & 1u) != 0) << "\n";
        return kExitOk;
    }
    if (tag == "DPRB") {
        const auto p = read_dprb(in);
        out << "format=DPRB\n"
            << "version=1\n"
            << "dim=" << p.dim() << "\n"
            << "rank=" << p.rank() << "\n"
            << "labels=" << p.label_count() << "\n"
            << "trainable_parameters=" << p.trainable_parameter_count() << "\n";
        if (const auto* s = std::get_if<SingleLayer>(&p.layer_spec)) {
            out << "layer=" << s->index << "\n";
        } else {
            const auto& mix = std::get<LayerMix>(p.layer_spec);
            const auto w = mixture_weights(mix.alpha);
            out << "layer=mix\ninclude_layer0=" << (mix.include_layer0 ? 1 : 0) << "\nmixture_weights=";
            for (std::size_t k = 0; k < w.size(); ++k) out << (k ? "," : "") << fmt_double(w[k]);
            out << "\n";
        }
        out << "label_inventory=";
        for (std::size_t k = 0; k < p.inventory.size(); ++k) out << (k ? "," : "") << p.inventory.label(k);
        out << "\n";
        return kExitOk;
    }
    throw InputError(path + ": unknown file type (expected EMBF or DPRB magic)");
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
    SyntheticSpec spec;
    std::size_t train_sentences = 500;
    std::size_t dev_sentences = 100;
    std::string out_dir;
};

int cmd_synth(SynthFlags& f, std::ostream& out) {
    ensure_dir(f.out_dir);
    const auto basis = planted_basis(f.spec, f.spec.seed);
    const auto split = [&](const std::string& name, std::size_t count, std::uint64_t stream) {
        auto spec = f.spec;
        spec.sentences = count;
        spec.seed = substream_seed(f.spec.seed, stream);
        spec.id_prefix = name;
        const auto corpus = generate_corpus(spec, basis);
        write_text_file(path_in(f.out_dir, name + ".conllu"), write_conllu(corpus.sentences));
        write_embf_file(corpus.embeddings, path_in(f.out_dir, name + ".embf"));
        out << "wrote " << count << " " << name << " sentences\n";
    };
    split("train", f.train_sentences, 1);
    split("dev", f.dev_sentences, 2);
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Linear dependency probes over frozen encoder embeddings"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1);

    TrainFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "train probes, one per seed, and score them on dev");
    add_train_flags(train_cmd, train_flags, true);
    train_cmd->add_option("--out", train_flags.out_dir, "output directory")->required();

    EvalFlags eval_flags;
    auto* eval_cmd = app.add_subcommand("evaluate", "score probes on a treebank");
    eval_cmd->add_option("--probe", eval_flags.probes, "probe file (repeatable)")->required();
    eval_cmd->add_option("--conllu", eval_flags.conllu, "gold treebank")->required();
    eval_cmd->add_option("--emb", eval_flags.emb, "embeddings (EMBF)")->required();
    eval_cmd->add_option("--distance", eval_flags.distance, "l2 or squared")->capture_default_str();
    eval_cmd->add_flag("--ignore-punct", eval_flags.ignore_punct, "skip PUNCT tokens");
    eval_cmd->add_flag("--coarse-labels", eval_flags.coarse_labels, "strip relation subtypes");
    eval_cmd->add_option("--report", eval_flags.report, "write key=value report here");

    DecodeFlags decode_flags;
    auto* decode_cmd = app.add_subcommand("decode", "predict trees and write CoNLL-U");
    decode_cmd->add_option("--probe", decode_flags.probe, "probe file")->required();
    decode_cmd->add_option("--conllu", decode_flags.conllu, "input treebank (tokens)")->required();
    decode_cmd->add_option("--emb", decode_flags.emb, "embeddings (EMBF)")->required();
    decode_cmd->add_option("--distance", decode_flags.distance, "l2 or squared")->capture_default_str();
    decode_cmd->add_flag("--coarse-labels", decode_flags.coarse_labels, "strip relation subtypes");
    decode_cmd->add_option("--out", decode_flags.out, "output CoNLL-U (default stdout)");

    ScanFlags scan_flags;
    auto* scan_cmd = app.add_subcommand("layer-scan", "train one probe per stored layer");
    scan_cmd->add_option("--from-csv", scan_flags.from_csv, "render an existing scan CSV and exit");
    {
        // Same flags as train, but optional when rendering.
        auto& t = scan_flags.train;
        scan_cmd->add_option("--train", t.train_conllu, "training treebank");
        scan_cmd->add_option("--emb", t.train_emb, "training embeddings");
        scan_cmd->add_option("--dev", t.dev_conllu, "development treebank");
        scan_cmd->add_option("--dev-emb", t.dev_emb, "development embeddings");
        scan_cmd->add_option("--rank", t.rank, "structural rank b")->capture_default_str();
        scan_cmd->add_option("--seeds", t.seeds, "comma-separated seeds (default 692)")->delimiter(',');
        scan_cmd->add_option("--jobs", t.jobs, "parallel jobs")->capture_default_str()->check(CLI::PositiveNumber);
        scan_cmd->add_option("--distance", t.distance, "l2 or squared")->capture_default_str();
        scan_cmd->add_flag("--ignore-punct", t.ignore_punct, "skip PUNCT tokens when scoring");
        scan_cmd->add_flag("--coarse-labels", t.coarse_labels, "strip relation subtypes");
        scan_cmd->add_option("--max-epochs", t.max_epochs, "epoch limit")->capture_default_str();
        scan_cmd->add_option("--batch-size", t.batch_size, "sentences per batch")->capture_default_str();
        scan_cmd->add_option("--lr", t.learning_rate, "initial learning rate")->capture_default_str();
    }
    scan_cmd->add_option("--layers", scan_flags.layers, "comma-separated layer subset")->delimiter(',');
    scan_cmd->add_option("--out", scan_flags.csv, "CSV output (default stdout)");

    RankFlags rank_flags;
    auto* rank_cmd = app.add_subcommand("rank", "correlate probe scores with downstream scores");
    rank_cmd->add_option("--scores", rank_flags.scores, "scores CSV")->required();
    rank_cmd->add_option("--exclude", rank_flags.exclude, "tag=X, language=X or model=X (repeatable)");
    rank_cmd->add_option("--permutations", rank_flags.permutations, "permutation test iterations")
        ->capture_default_str();
    rank_cmd->add_option("--seed", rank_flags.seed, "permutation seed")->capture_default_str();
    rank_cmd->add_option("--out", rank_flags.out, "write key=value result here");
    rank_cmd->add_option("--points", rank_flags.points, "write scatter points CSV here");
    rank_cmd->add_flag("--per-language", rank_flags.per_language, "list the top probe per language");

    std::string inspect_path;
    auto* inspect_cmd = app.add_subcommand("inspect", "print EMBF or DPRB headers");
    inspect_cmd->add_option("file", inspect_path, "file to inspect")->required();

    SynthFlags synth_flags;
    auto* synth_cmd = app.add_subcommand("synth", "write a planted-structure corpus");
    synth_cmd->add_option("--out", synth_flags.out_dir, "output directory")->required();
    synth_cmd->add_option("--train-sentences", synth_flags.train_sentences)->capture_default_str();
    synth_cmd->add_option("--dev-sentences", synth_flags.dev_sentences)->capture_default_str();
    synth_cmd->add_option("--dim", synth_flags.spec.dim)->capture_default_str();
    synth_cmd->add_option("--rank", synth_flags.spec.structural_rank)->capture_default_str();
    synth_cmd->add_option("--labels", synth_flags.spec.labels, "relation count including root")
        ->capture_default_str();
    synth_cmd->add_option("--min-length", synth_flags.spec.min_length)->capture_default_str();
    synth_cmd->add_option("--max-length", synth_flags.spec.max_length)->capture_default_str();
    synth_cmd->add_option("--noise", synth_flags.spec.noise)->capture_default_str();
    synth_cmd->add_option("--layers", synth_flags.spec.layer_count)->capture_default_str();
    synth_cmd->add_option("--planted-layer", synth_flags.spec.planted_layer)->capture_default_str();
    synth_cmd->add_option("--seed", synth_flags.spec.seed)->capture_default_str();

    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*train_cmd) return cmd_train(train_flags, args, out);
        if (*eval_cmd) return cmd_evaluate(eval_flags, out);
        if (*decode_cmd) return cmd_decode(decode_flags, out);
        if (*scan_cmd) {
            const auto& t = scan_flags.train;
            if (scan_flags.from_csv.empty() &&
                (t.train_conllu.empty() || t.train_emb.empty() || t.dev_conllu.empty() || t.dev_emb.empty())) {
                throw InputError("layer-scan: --train, --emb, --dev and --dev-emb are required");
            }
            return cmd_layer_scan(scan_flags, out);
        }
        if (*rank_cmd) return cmd_rank(rank_flags, out);
        if (*inspect_cmd) return cmd_inspect(inspect_path, out);
        if (*synth_cmd) return cmd_synth(synth_flags, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace depprobe::cli
