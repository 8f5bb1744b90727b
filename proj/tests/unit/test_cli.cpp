#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blockforge/render.hpp"
#include "blockforge/scenegen.hpp"

using namespace blockforge;
namespace fs = std::filesystem;

namespace {

const std::string kCli = BLOCKFORGE_CLI_PATH;

int run(const std::string& args) {
    std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string s(const std::string& sub = "") const { return (path / sub).string(); }
};

}  // namespace

TEST_CASE("cli gen: identical seeds give identical files") {
    TempDir a("bf_cli_gen_a"), b("bf_cli_gen_b");
    REQUIRE(run("gen --task covering --count 4 --seed 11 --out " + a.s()) == 0);
    REQUIRE(run("gen --task covering --count 4 --seed 11 --out " + b.s()) == 0);
    for (int i = 0; i < 4; ++i) {
        char name[48];
        std::snprintf(name, sizeof(name), "scene_%06d.json", i);
        REQUIRE(slurp(a.s(name)) == slurp(b.s(name)));
    }
    auto stats = nlohmann::json::parse(slurp(a.s("stats.json")));
    REQUIRE(stats.at("count").get<int>() == 4);
    REQUIRE(fs::exists(a.s("manifest.json")));
}

TEST_CASE("cli gen: silhouette stats carry the mean target count") {
    TempDir d("bf_cli_gen_sil");
    REQUIRE(run("gen --task silhouette --count 64 --seed 3 --out " + d.s()) == 0);
    auto stats = nlohmann::json::parse(slurp(d.s("stats.json")));
    double mean = stats.at("mean_targets").get<double>();
    REQUIRE(mean > 2.0);
    REQUIRE(mean < 7.0);
}

TEST_CASE("cli play + replay round trip") {
    TempDir d("bf_cli_play");
    REQUIRE(run("play --policy random --task connecting --episodes 3 --seed 4 --out " + d.s()) ==
            0);
    REQUIRE(fs::exists(d.s("summary.json")));
    REQUIRE(run("play --replay " + d.s("episode_000000.jsonl")) == 0);
    REQUIRE(run("play --replay " + d.s("episode_000002.jsonl")) == 0);

    // tampering with a hash makes replay fail with the threshold exit code
    std::string log = slurp(d.s("episode_000001.jsonl"));
    auto pos = log.find("\"scene_hash\":\"");
    REQUIRE(pos != std::string::npos);
    log[pos + 14] = log[pos + 14] == 'a' ? 'b' : 'a';
    std::ofstream(d.s("tampered.jsonl")) << log;
    REQUIRE(run("play --replay " + d.s("tampered.jsonl")) == 3);
}

TEST_CASE("cli render: deterministic bytes, one frame per step") {
    TempDir scenes("bf_cli_render_in"), out1("bf_cli_render_1"), out2("bf_cli_render_2");
    REQUIRE(run("gen --task silhouette --count 1 --seed 8 --out " + scenes.s()) == 0);
    REQUIRE(run("render --scene " + scenes.s("scene_000000.json") + " --out " + out1.s()) == 0);
    REQUIRE(run("render --scene " + scenes.s("scene_000000.json") + " --out " + out2.s()) == 0);
    REQUIRE(slurp(out1.s("scene.svg")) == slurp(out2.s("scene.svg")));
    REQUIRE(slurp(out1.s("scene.svg")).find("<svg") == 0);

    TempDir play("bf_cli_render_play"), frames("bf_cli_render_frames");
    REQUIRE(run("play --policy random --task covering --episodes 1 --seed 6 --out " + play.s()) ==
            0);
    REQUIRE(run("render --episode " + play.s("episode_000000.jsonl") + " --out " + frames.s()) ==
            0);
    int steps = 0;
    {
        std::ifstream in(play.s("episode_000000.jsonl"));
        std::string line;
        while (std::getline(in, line))
            if (line.find("\"type\":\"header\"") == std::string::npos && !line.empty())
                steps += 1;
    }
    int frames_found = 0;
    for (auto& e : fs::directory_iterator(frames.path)) {
        (void)e;
        frames_found += 1;
    }
    REQUIRE(frames_found == steps + 1);  // initial frame plus one per step
}

TEST_CASE("cli train + eval on a toy config") {
    TempDir d("bf_cli_train");
    nlohmann::json cfg{{"task", "silhouette"}, {"fixed_level", 1},  {"latent", 6},
                       {"n_offsets", 5},       {"batch", 4},        {"learner_steps", 4},
                       {"eval_every", 0},      {"max_steps", 8},    {"seed", 12},
                       {"out_dir", d.s("run")}};
    std::ofstream(d.s("config.json")) << cfg.dump();
    REQUIRE(run("train --config " + d.s("config.json")) == 0);
    REQUIRE(fs::exists(d.s("run/checkpoint_final/params.bin")));
    REQUIRE(fs::exists(d.s("run/metrics.csv")));
    REQUIRE(fs::exists(d.s("run/state/state.json")));

    REQUIRE(run("eval --checkpoint " + d.s("run/checkpoint_final") +
                " --episodes 4 --seed 2 --out " + d.s("eval/report.json")) == 0);
    auto report = nlohmann::json::parse(slurp(d.s("eval/report.json")));
    REQUIRE(report.at("schema_version").get<int>() == 1);
    REQUIRE(report.at("entries").size() == 1);
    REQUIRE(report.at("entries").at(0).contains("terminations"));

    // threshold gate: absurd requirement -> exit 3
    REQUIRE(run("eval --checkpoint " + d.s("run/checkpoint_final") +
                " --episodes 2 --seed 2 --min-return 999") == 3);

    // env var config path works
    std::string cmd = "BLOCKFORGE_CONFIG=" + d.s("config.json") + " " + kCli +
                      " train >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
}

TEST_CASE("cli surfaces config errors with exit code 2") {
    REQUIRE(run("train --config /does/not/exist.json") == 2);
    REQUIRE(run("eval --checkpoint /does/not/exist") == 2);
    REQUIRE(run("render") == 2);
}
