#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "osr/cli.hpp"

using namespace osr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"osr"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

// Runs with stdout redirected to a file so the echoed config can be inspected.
int run_cli_capture(const std::vector<std::string>& args, std::string* captured) {
    std::fflush(stdout);
    int saved = dup(1);
    REQUIRE(saved >= 0);
    fs::path tmp = fs::temp_directory_path() / "osr_cli_capture.txt";
    FILE* f = std::freopen(tmp.string().c_str(), "w", stdout);
    REQUIRE(f != nullptr);
    int rc = run_cli(args);
    std::fflush(stdout);
    dup2(saved, 1);
    close(saved);
    std::ifstream in(tmp);
    std::stringstream ss;
    ss << in.rdbuf();
    *captured = ss.str();
    return rc;
}

// The machine-readable error record is the final stdout line.
json last_json_line(const std::string& out) {
    std::size_t end = out.find_last_not_of(" \n");
    REQUIRE(end != std::string::npos);
    std::size_t start = out.rfind('\n', end);
    start = (start == std::string::npos) ? 0 : start + 1;
    return json::parse(out.substr(start, end - start + 1));
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempTree {
    fs::path root;
    TempTree() {
        root = fs::temp_directory_path() /
               ("osr_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~TempTree() { fs::remove_all(root); }
    std::string operator/(const std::string& leaf) const {
        return (root / leaf).string();
    }
    void write(const std::string& leaf, const std::string& text) const {
        std::ofstream out(root / leaf);
        out << text;
    }
};

// Small end-to-end corpus: 5 classes (3 known style), 6 features, quick to train.
void make_pipeline_inputs(const TempTree& t) {
    t.write("gen.json", R"({"n_total_classes": 5, "n_known_style": 3, "raw_dim": 6,
                            "samples_per_class": 30})");
    t.write("split.json.cfg", R"({"n_known": 3, "test_fraction": 0.3})");
    t.write("train.json", R"({"epochs": 3, "batch_size": 16, "eval_every": 2,
                              "encoder": {"hidden_dims": [8], "feature_dim": 5,
                                          "activation": "tanh"}})");
}

} // namespace

TEST_SUITE("cli") {

    TEST_CASE("usage errors exit 1, help exits 0") {
        CHECK(run_cli({}) == 1);
        CHECK(run_cli({"no-such-command"}) == 1);
        CHECK(run_cli({"train", "--no-such-flag"}) == 1);
        std::string help;
        CHECK(run_cli_capture({"--help"}, &help) == 0);
        CHECK(help.find("gen-data") != std::string::npos);
    }

    TEST_CASE("missing inputs and bad configs exit 2 with a JSON error record") {
        TempTree t;
        std::string out;
        CHECK(run_cli_capture({"train", "--dataset", t / "absent.csv", "--split",
                               t / "absent.json"},
                              &out) == 2);
        json rec = last_json_line(out);
        CHECK(rec.at("error").at("kind") == "data");
        CHECK(rec.at("error").at("message").get<std::string>().find("absent.csv") !=
              std::string::npos);

        t.write("bad.json", R"({"not_a_generator_key": 1})");
        CHECK(run_cli_capture({"gen-data", "--config", t / "bad.json", "--out", t / "g"},
                              &out) == 2);
        rec = last_json_line(out);
        CHECK(rec.at("error").at("kind") == "config");
    }

    TEST_CASE("gen-data, split, train, eval pipeline produces every artifact") {
        TempTree t;
        make_pipeline_inputs(t);
        std::string echoed;

        REQUIRE(run_cli_capture({"gen-data", "--config", t / "gen.json", "--seed", "7",
                                 "--out", t / "data"},
                                &echoed) == 0);
        json gen_echo = json::parse(echoed);
        CHECK(gen_echo.at("config").at("seed") == 7);
        CHECK(gen_echo.at("n") == 150);
        REQUIRE(fs::exists(t / "data/dataset.csv"));

        REQUIRE(run_cli({"split", "--dataset", t / "data/dataset.csv", "--config",
                         t / "split.json.cfg", "--seed", "7", "--out", t / "sp"}) == 0);
        REQUIRE(fs::exists(t / "sp/split.json"));

        REQUIRE(run_cli_capture({"train", "--dataset", t / "data/dataset.csv", "--split",
                                 t / "sp/split.json", "--config", t / "train.json",
                                 "--seed", "7", "--out", t / "run"},
                                &echoed) == 0);
        json train_echo = json::parse(echoed);
        CHECK(train_echo.at("final_metrics").contains("auroc"));
        for (const char* leaf :
             {"run/config.json", "run/split.json", "run/steps.log", "run/model.ckpt",
              "run/snapshots/epoch_0002.json", "run/snapshots/epoch_0003.json"})
            CHECK(fs::exists(t / leaf));

        REQUIRE(run_cli_capture({"eval", "--dataset", t / "data/dataset.csv", "--split",
                                 t / "sp/split.json", "--checkpoint", t / "run/model.ckpt",
                                 "--out", t / "ev"},
                                &echoed) == 0);
        for (const char* leaf :
             {"ev/metrics.json", "ev/scored_samples.csv", "ev/activation_histogram.csv",
              "ev/ccr_fpr_curve.csv", "ev/projection_confusion.csv"})
            CHECK(fs::exists(t / leaf));

        // Metrics reported at the end of training match a fresh eval of the
        // saved checkpoint.
        json eval_echo = json::parse(echoed);
        CHECK(eval_echo.at("metrics").at("auroc") ==
              train_echo.at("final_metrics").at("auroc"));
        CHECK(eval_echo.at("metrics").at("oscr") ==
              train_echo.at("final_metrics").at("oscr"));
    }

    TEST_CASE("repeat train invocations are byte-identical, eval is repeatable") {
        TempTree t;
        make_pipeline_inputs(t);
        REQUIRE(run_cli({"gen-data", "--config", t / "gen.json", "--seed", "9", "--out",
                         t / "data"}) == 0);
        REQUIRE(run_cli({"split", "--dataset", t / "data/dataset.csv", "--config",
                         t / "split.json.cfg", "--seed", "9", "--out", t / "sp"}) == 0);
        std::vector<std::string> train_args{
            "train",   "--dataset", t / "data/dataset.csv", "--split", t / "sp/split.json",
            "--config", t / "train.json", "--seed", "9", "--out", ""};
        train_args.back() = t / "a";
        REQUIRE(run_cli(train_args) == 0);
        train_args.back() = t / "b";
        REQUIRE(run_cli(train_args) == 0);
        CHECK(read_file(t / "a/model.ckpt") == read_file(t / "b/model.ckpt"));
        CHECK(read_file(t / "a/steps.log") == read_file(t / "b/steps.log"));

        for (const char* dir : {"e1", "e2"})
            REQUIRE(run_cli({"eval", "--dataset", t / "data/dataset.csv", "--split",
                             t / "sp/split.json", "--checkpoint", t / "a/model.ckpt",
                             "--out", t / dir}) == 0);
        CHECK(read_file(t / "e1/metrics.json") == read_file(t / "e2/metrics.json"));
        CHECK(read_file(t / "e1/scored_samples.csv") ==
              read_file(t / "e2/scored_samples.csv"));
    }

    TEST_CASE("different seeds give different checkpoints") {
        TempTree t;
        make_pipeline_inputs(t);
        REQUIRE(run_cli({"gen-data", "--config", t / "gen.json", "--seed", "9", "--out",
                         t / "data"}) == 0);
        REQUIRE(run_cli({"split", "--dataset", t / "data/dataset.csv", "--config",
                         t / "split.json.cfg", "--seed", "9", "--out", t / "sp"}) == 0);
        for (const char* seed : {"1", "2"})
            REQUIRE(run_cli({"train", "--dataset", t / "data/dataset.csv", "--split",
                             t / "sp/split.json", "--config", t / "train.json", "--seed",
                             seed, "--out", t / ("s" + std::string(seed))}) == 0);
        CHECK(read_file(t / "s1/model.ckpt") != read_file(t / "s2/model.ckpt"));
    }

    TEST_CASE("score writes one row per sample and honors the threshold") {
        TempTree t;
        make_pipeline_inputs(t);
        REQUIRE(run_cli({"gen-data", "--config", t / "gen.json", "--seed", "3", "--out",
                         t / "data"}) == 0);
        REQUIRE(run_cli({"split", "--dataset", t / "data/dataset.csv", "--config",
                         t / "split.json.cfg", "--seed", "3", "--out", t / "sp"}) == 0);
        REQUIRE(run_cli({"train", "--dataset", t / "data/dataset.csv", "--split",
                         t / "sp/split.json", "--config", t / "train.json", "--seed", "3",
                         "--out", t / "run"}) == 0);

        std::string echoed;
        REQUIRE(run_cli_capture({"score", "--dataset", t / "data/dataset.csv",
                                 "--checkpoint", t / "run/model.ckpt", "--threshold",
                                 "1e300", "--out", t / "sc"},
                                &echoed) == 0);
        json echo = json::parse(echoed);
        CHECK(echo.at("n") == 150);
        CHECK(echo.at("accepted") == 0);

        std::ifstream in(t / "sc/scores.csv");
        std::string line;
        std::getline(in, line);
        CHECK(line == "sample,label,predicted_class,c_max,act_a,act_b,accepted");
        std::size_t rows = 0, rejected = 0;
        while (std::getline(in, line)) {
            ++rows;
            if (line.size() >= 2 && line.substr(line.size() - 2) == ",0") ++rejected;
        }
        CHECK(rows == 150);
        CHECK(rejected == 150);

        REQUIRE(run_cli_capture({"score", "--dataset", t / "data/dataset.csv",
                                 "--checkpoint", t / "run/model.ckpt", "--out", t / "sc2"},
                                &echoed) == 0);
        CHECK(json::parse(echoed).at("accepted") == 150);
    }

    TEST_CASE("ablate emits one csv row per configuration") {
        TempTree t;
        make_pipeline_inputs(t);
        t.write("tiny.json", R"({"epochs": 1, "batch_size": 16})");
        REQUIRE(run_cli({"gen-data", "--config", t / "gen.json", "--seed", "5", "--out",
                         t / "data"}) == 0);
        REQUIRE(run_cli({"split", "--dataset", t / "data/dataset.csv", "--config",
                         t / "split.json.cfg", "--seed", "5", "--out", t / "sp"}) == 0);
        REQUIRE(run_cli({"ablate", "--dataset", t / "data/dataset.csv", "--split",
                         t / "sp/split.json", "--config", t / "tiny.json", "--seed", "5",
                         "--seeds", "2", "--out", t / "ab"}) == 0);

        std::ifstream in(t / "ab/ablation.csv");
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        REQUIRE(lines.size() == 7);
        CHECK(lines[0].rfind("configuration,", 0) == 0);
        CHECK(lines[1].rfind("sp,0,0,0,0,0,", 0) == 0);
        CHECK(lines[6].rfind("mp+lf+lfb+lorth+lpb,1,1,1,1,1,", 0) == 0);

        std::string err;
        CHECK(run_cli_capture({"ablate", "--dataset", t / "data/dataset.csv", "--split",
                               t / "sp/split.json", "--suite", "nope", "--out", t / "x"},
                              &err) == 2);
        CHECK(err.find("\"kind\":\"config\"") != std::string::npos);
    }

    TEST_CASE("train echo is replayable: rerunning the echoed config reproduces the run") {
        TempTree t;
        make_pipeline_inputs(t);
        REQUIRE(run_cli({"gen-data", "--config", t / "gen.json", "--seed", "21", "--out",
                         t / "data"}) == 0);
        REQUIRE(run_cli({"split", "--dataset", t / "data/dataset.csv", "--config",
                         t / "split.json.cfg", "--seed", "21", "--out", t / "sp"}) == 0);
        std::string echoed;
        REQUIRE(run_cli_capture({"train", "--dataset", t / "data/dataset.csv", "--split",
                                 t / "sp/split.json", "--config", t / "train.json",
                                 "--seed", "21", "--out", t / "r1"},
                                &echoed) == 0);

        // The echoed config block is itself a complete train config.
        json echo = json::parse(echoed);
        json cfg = echo.at("config");
        cfg.erase("encoder"); // input dim is rederived from the dataset
        cfg["encoder"] = {{"hidden_dims", echo["config"]["encoder"]["hidden_dims"]},
                          {"feature_dim", echo["config"]["encoder"]["feature_dim"]},
                          {"activation", echo["config"]["encoder"]["activation"]}};
        t.write("replay.json", cfg.dump());
        REQUIRE(run_cli({"train", "--dataset", echo.at("dataset").get<std::string>(),
                         "--split", echo.at("split").get<std::string>(), "--config",
                         t / "replay.json", "--seed",
                         std::to_string(cfg.at("seed").get<std::uint64_t>()), "--out",
                         t / "r2"}) == 0);
        CHECK(read_file(t / "r1/model.ckpt") == read_file(t / "r2/model.ckpt"));
    }

    TEST_CASE("gradcheck command passes and reports every loss form") {
        std::string out;
        CHECK(run_cli_capture({"gradcheck", "--seed", "2"}, &out) == 0);
        for (const char* name :
             {"classification", "known_feature_alignment", "background_center_alignment",
              "activation_enhancement_composite", "prototype_orthogonality",
              "background_similarity_penalty", "orthogonal_composite"})
            CHECK(out.find(name) != std::string::npos);
    }

    TEST_CASE("windowed signal ingestion feeds the same pipeline") {
        TempTree t;
        std::ofstream sig(t / "sig.csv");
        sig << "subject,trial,label,t,ch1,ch2\n";
        for (int lab = 0; lab < 4; ++lab)
            for (int trial = 0; trial < 2; ++trial)
                for (int tt = 0; tt < 24; ++tt)
                    sig << "0," << trial << "," << lab << "," << tt << ","
                        << 0.1 * lab + 0.01 * tt << "," << 0.2 * trial << "\n";
        sig.close();
        t.write("sp.cfg", R"({"n_known": 2, "test_fraction": 0.5})");

        std::string echoed;
        REQUIRE(run_cli_capture({"split", "--dataset", t / "sig.csv", "--window", "8",
                                 "--stride", "8", "--config", t / "sp.cfg", "--seed", "1",
                                 "--out", t / "sp"},
                                &echoed) == 0);
        json echo = json::parse(echoed);
        CHECK(echo.at("known_class_ids").size() == 2);
        CHECK(fs::exists(t / "sp/split.json"));
    }
}
