#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"
#include "depprobe/embstore.hpp"
#include "depprobe/layer_scan.hpp"
#include "depprobe/probe.hpp"
#include "depprobe/treebank.hpp"
#include "synthetic_fixture.hpp"

namespace fs = std::filesystem;
using namespace depprobe;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "depprobe");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("depprobe-cli-" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

const TempDir& workspace() {
    static TempDir dir;
    static bool ready = false;
    if (!ready) {
        REQUIRE(run({"synth", "--out", dir / "syn", "--train-sentences", "120", "--dev-sentences", "30"}).code == 0);
        REQUIRE(run({"synth", "--out", dir / "syn4", "--train-sentences", "150", "--dev-sentences", "30",
                     "--layers", "4", "--planted-layer", "2"})
                    .code == 0);
        ready = true;
    }
    return dir;
}

std::vector<std::string> train_args(const TempDir& w, const std::string& corpus, const std::string& out) {
    return {"train", "--train", w / (corpus + "/train.conllu"), "--emb", w / (corpus + "/train.embf"),
            "--dev", w / (corpus + "/dev.conllu"), "--dev-emb", w / (corpus + "/dev.embf"),
            "--rank", "16", "--max-epochs", "5", "--out", w / out};
}

}  // namespace

TEST_CASE("help and usage errors") {
    CHECK(run({"--help"}).code == cli::kExitOk);
    CHECK(run({}).code == cli::kExitInput);
    CHECK(run({"train", "--bogus"}).code == cli::kExitInput);
    CHECK(run({"frobnicate"}).code == cli::kExitInput);
}

TEST_CASE("train writes one probe per default seed plus report and manifest") {
    const auto& w = workspace();
    auto args = train_args(w, "syn", "three");
    args.insert(args.end(), {"--layer", "mid", "--jobs", "2"});
    const auto r = run(args);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    for (const char* seed : {"692", "710", "932"}) {
        CHECK(fs::exists(w / ("three/probe-seed" + std::string(seed) + ".dprb")));
        CHECK(fs::exists(w / ("three/train-log-seed" + std::string(seed) + ".txt")));
    }
    const auto report = slurp(w / "three/report.txt");
    CHECK(report.find("# command=train") != std::string::npos);
    CHECK(report.find("# seeds=692,710,932") != std::string::npos);
    CHECK(report.find("runs=3\n") != std::string::npos);
    CHECK(report.find("timing.") == std::string::npos);
    const auto manifest = slurp(w / "three/manifest.txt");
    CHECK(manifest.find("timing.total_seconds=") != std::string::npos);
    CHECK(manifest.find("config.rank=16") != std::string::npos);
    CHECK(r.out.find("LAS") != std::string::npos);
}

TEST_CASE("single seed reports std 0 and is idempotent") {
    const auto& w = workspace();
    auto args = train_args(w, "syn", "one");
    args.insert(args.end(), {"--seeds", "7"});
    REQUIRE(run(args).code == 0);
    const auto probe = slurp(w / "one/probe-seed7.dprb");
    const auto report = slurp(w / "one/report.txt");
    CHECK(report.find("las_std=0\n") != std::string::npos);
    CHECK(report.find("single_seed=1\n") != std::string::npos);
    CHECK_FALSE(fs::exists(w / "one/probe-seed692.dprb"));
    REQUIRE(run(args).code == 0);
    CHECK(slurp(w / "one/probe-seed7.dprb") == probe);
    CHECK(slurp(w / "one/report.txt") == report);
}

TEST_CASE("evaluate reproduces the train report for the same probe") {
    const auto& w = workspace();
    auto args = train_args(w, "syn", "eval");
    args.insert(args.end(), {"--seeds", "11"});
    REQUIRE(run(args).code == 0);
    const auto r = run({"evaluate", "--probe", w / "eval/probe-seed11.dprb", "--conllu", w / "syn/dev.conllu",
                        "--emb", w / "syn/dev.embf", "--report", w / "eval/eval.txt"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto train_report = slurp(w / "eval/report.txt");
    const auto eval_report = slurp(w / "eval/eval.txt");
    const auto las_line = [](const std::string& text) {
        const auto at = text.find("\nlas=");
        return text.substr(at, text.find('\n', at + 1) - at);
    };
    CHECK(las_line(train_report) == las_line(eval_report));
}

TEST_CASE("mixture probes record their weights") {
    const auto& w = workspace();
    auto args = train_args(w, "syn4", "mix");
    args.insert(args.end(), {"--layer", "mix", "--seeds", "3"});
    const auto r = run(args);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("mixture weights") != std::string::npos);
    const auto probe = read_dprb_file(w / "mix/probe-seed3.dprb");
    REQUIRE(is_mix(probe.layer_spec));
    CHECK(std::get<LayerMix>(probe.layer_spec).alpha.size() == 4);
    const auto info = run({"inspect", w / "mix/probe-seed3.dprb"});
    CHECK(info.out.find("layer=mix") != std::string::npos);
    CHECK(info.out.find("mixture_weights=") != std::string::npos);
}

TEST_CASE("decode with the planted probe reproduces gold CoNLL-U") {
    const auto& w = workspace();
    auto s = fixture::planted_splits(1, 30);
    const auto probe = planted_probe(s.spec, s.basis);
    write_dprb_file(probe, w / "planted.dprb");
    const auto r = run({"decode", "--probe", w / "planted.dprb", "--conllu", w / "syn/dev.conllu", "--emb",
                        w / "syn/dev.embf", "--out", w / "pred.conllu"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(slurp(w / "pred.conllu") == slurp(w / "syn/dev.conllu"));
    CHECK(fs::exists(w / "pred.conllu.manifest.txt"));
    const auto to_stdout = run({"decode", "--probe", w / "planted.dprb", "--conllu", w / "syn/dev.conllu",
                                "--emb", w / "syn/dev.embf"});
    CHECK(to_stdout.out == slurp(w / "syn/dev.conllu"));
}

TEST_CASE("layer scan finds the planted layer") {
    const auto& w = workspace();
    const auto r = run({"layer-scan", "--train", w / "syn4/train.conllu", "--emb", w / "syn4/train.embf", "--dev",
                        w / "syn4/dev.conllu", "--dev-emb", w / "syn4/dev.embf", "--rank", "16", "--max-epochs",
                        "8", "--jobs", "2", "--out", w / "scan.csv"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto rows = parse_layer_scan_csv(slurp(w / "scan.csv"));
    CHECK(rows.size() == 4);
    CHECK(peak_las_layer(rows) == 2);
    CHECK(r.out.find("peak LAS at layer 2") != std::string::npos);

    const auto ref = run({"layer-scan", "--from-csv", std::string(DEPPROBE_TEST_DATA_DIR) + "/rembert_layers_en_ewt.csv"});
    CHECK(ref.code == 0);
    CHECK(ref.out.find("peak LAS at layer 17") != std::string::npos);
}

TEST_CASE("rank writes results and scatter points") {
    const auto& w = workspace();
    const std::string scores = std::string(DEPPROBE_TEST_DATA_DIR) + "/paper46.csv";
    const auto r = run({"rank", "--scores", scores, "--permutations", "200", "--out", w / "rank.txt", "--points",
                        w / "points.csv", "--per-language", "--exclude", "tag=rembert"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto result = slurp(w / "rank.txt");
    CHECK(result.find("n=37\n") != std::string::npos);
    CHECK(result.find("filter=exclude tag=rembert\n") != std::string::npos);
    CHECK(r.out.find("FI-TDT") != std::string::npos);
    const auto points = slurp(w / "points.csv");
    CHECK(std::count(points.begin(), points.end(), '\n') == 37 + 1 + std::count(result.begin(), result.end(), '#'));
}

TEST_CASE("inspect EMBF") {
    const auto& w = workspace();
    const auto r = run({"inspect", w / "syn4/train.embf"});
    CHECK(r.code == 0);
    CHECK(r.out.find("format=EMBF") != std::string::npos);
    CHECK(r.out.find("layer_count=4") != std::string::npos);
    CHECK(r.out.find("dim=64") != std::string::npos);
}

TEST_CASE("exit codes separate input errors from numeric failures") {
    const auto& w = workspace();
    CHECK(run({"inspect", w / "syn/train.conllu"}).code == cli::kExitInput);
    CHECK(run({"inspect", w / "missing.bin"}).code == cli::kExitInput);
    CHECK(run({"rank", "--scores", w / "missing.csv"}).code == cli::kExitInput);

    // Dev embeddings for another corpus: alignment error names the sentence.
    auto args = train_args(w, "syn", "misaligned");
    args[8] = w / "syn4/dev.embf";
    const auto mis = run(args);
    CHECK(mis.code == cli::kExitInput);

    // Same shapes, different sentence order.
    auto set = read_embf_file(w / "syn/dev.embf");
    std::swap(set.sentences[0], set.sentences[1]);
    write_embf_file(set, w / "swapped.embf");
    args = train_args(w, "syn", "swapped");
    args[8] = w / "swapped.embf";
    const auto sw = run(args);
    CHECK(sw.code == cli::kExitInput);
    CHECK(sw.err.find("dev-1") != std::string::npos);

    // Rank above dim.
    args = train_args(w, "syn", "rank");
    args[10] = "65";
    CHECK(run(args).code == cli::kExitInput);

    // Non-finite embeddings are rejected as input.
    auto nan_set = read_embf_file(w / "syn/train.embf");
    nan_set.sentences[0].payload[0] = std::numeric_limits<float>::quiet_NaN();
    write_embf_file(nan_set, w / "nan.embf");
    args = train_args(w, "syn", "nan");
    args[4] = w / "nan.embf";
    const auto nan = run(args);
    CHECK(nan.code == cli::kExitInput);
    CHECK(nan.err.find("train-1") != std::string::npos);

    // A divergent learning rate overflows the loss.
    args = train_args(w, "syn", "huge");
    args.insert(args.end(), {"--lr", "1e300", "--seeds", "1"});
    const auto huge = run(args);
    CHECK(huge.code == cli::kExitNumeric);
    CHECK(huge.err.find("numeric error") != std::string::npos);
}
