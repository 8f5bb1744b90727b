// blockforge command-line harness: scene generation, episode running and
// replay, DQN training, evaluation, and SVG rendering.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "blockforge/episode.hpp"
#include "blockforge/manifest.hpp"
#include "blockforge/render.hpp"
#include "blockforge/train.hpp"

namespace fs = std::filesystem;
using namespace blockforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitThreshold = 3;

struct LoadedNet {
    nn::GNParams net;
    TrainConfig cfg;
};

LoadedNet load_checkpoint(const std::string& dir) {
    std::ifstream cfg_in(dir + "/config.json");
    if (!cfg_in) throw std::runtime_error("missing " + dir + "/config.json");
    TrainConfig cfg = train_config_from_json(nlohmann::json::parse(cfg_in));
    auto dqn = Trainer::make_dqn_config(cfg);
    LoadedNet out{nn::GNParams::init(dqn.gn, Rng(0)), cfg};
    nn::load_params(out.net.p, dir + "/params.bin", dir + "/params.json");
    return out;
}

void save_checkpoint(const nn::GNParams& net, const TrainConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    nn::save_params(net.p, dir + "/params.bin", dir + "/params.json");
    std::ofstream(dir + "/config.json") << to_json(cfg).dump(2) << "\n";
}

std::unique_ptr<Policy> make_policy(const std::string& name, const nn::GNParams* net,
                                    const TrainConfig& cfg, int budget) {
    PlanConfig pc;
    pc.budget = budget;
    pc.n_rec = cfg.n_rec;
    pc.n_offsets = cfg.n_offsets;
    pc.connectivity = cfg.conn();
    pc.normalize = cfg.normalize;
    if (name == "random") return std::make_unique<RandomValidPolicy>(cfg.n_offsets);
    if (name == "heur-silhouette") return std::make_unique<SilhouetteHeuristic>(cfg.n_offsets);
    if (name == "heur-covering") return std::make_unique<CoveringHeuristic>();
    if (name == "dqn")
        return std::make_unique<GreedyQPolicy>(net, cfg.n_rec, cfg.conn(), cfg.normalize);
    if (name == "dqn-mcts") {
        pc.use_prior = true;
        return std::make_unique<MctsPolicy>(net, pc);
    }
    if (name == "raw-mcts") {
        pc.use_prior = false;
        return std::make_unique<MctsPolicy>(nullptr, pc);
    }
    throw std::runtime_error("unknown policy: " + name);
}

nlohmann::json stats_json(const EvalStats& s) {
    return nlohmann::json{{"episodes", s.episodes},
                          {"mean_return", s.mean_return},
                          {"median_return", s.median_return},
                          {"completed_rate", s.completed_rate},
                          {"terminations", s.reasons}};
}

int cmd_gen(const std::string& task_name, int level, int count, std::uint64_t seed,
            const std::string& out_dir, bool hardest) {
    TaskId task = task_from_string(task_name);
    fs::create_directories(out_dir);
    Rng base(seed);
    double mean_targets = 0.0, mean_obstacle_len = 0.0;
    for (int i = 0; i < count; ++i) {
        Rng ep = base.split(i);
        int lvl = level > 0 ? level : sample_level(1.0, task, ep, hardest);
        std::uint64_t scene_seed = ep.split("scene").next_u64();
        Scene s = generate_scene(LevelSpec(task, lvl), scene_seed);
        auto st = scene_stats(s);
        mean_targets += st.n_targets;
        mean_obstacle_len += st.obstacle_top_length;
        char name[64];
        std::snprintf(name, sizeof(name), "scene_%06d.json", i);
        std::ofstream(out_dir + "/" + name) << to_json(s).dump(2) << "\n";
        std::snprintf(name, sizeof(name), "scene_%06d.meta.json", i);
        std::ofstream(out_dir + "/" + name)
            << scene_sidecar(task, lvl, scene_seed, s).dump(2) << "\n";
    }
    nlohmann::json summary{{"task", task_name},
                           {"count", count},
                           {"mean_targets", mean_targets / count},
                           {"mean_obstacle_top_length", mean_obstacle_len / count}};
    std::ofstream(out_dir + "/stats.json") << summary.dump(2) << "\n";

    RunManifest mf;
    mf.command = "gen";
    mf.config = {{"task", task_name}, {"level", level}, {"count", count},
                 {"seed", seed},      {"hardest", hardest}};
    mf.seeds = {seed};
    mf.outputs = {out_dir + "/stats.json"};
    mf.write(out_dir + "/manifest.json");
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

int cmd_play(const std::string& policy_name, const std::string& task_name, int episodes,
             int level, bool hardest, int budget, std::uint64_t seed,
             const std::string& out_dir, const std::string& checkpoint, int workers,
             const std::string& replay_path) {
    if (!replay_path.empty()) {
        std::ifstream in(replay_path);
        if (!in) {
            std::cerr << "cannot open " << replay_path << "\n";
            return kExitConfig;
        }
        auto log = episode_log_from_jsonl(in);
        auto check = replay_episode(log);
        nlohmann::json rep{{"ok", check.ok},
                           {"first_mismatch", check.first_mismatch},
                           {"total_reward", check.total_reward}};
        std::cout << rep.dump(2) << "\n";
        return check.ok ? kExitOk : kExitThreshold;
    }

    TaskId task = task_from_string(task_name);
    TrainConfig cfg;
    cfg.task = task_name;
    std::optional<LoadedNet> loaded;
    if (!checkpoint.empty()) {
        loaded = load_checkpoint(checkpoint);
        cfg = loaded->cfg;
        cfg.task = task_name;
    }
    fs::create_directories(out_dir);

    std::vector<EpisodeResult> results(episodes);
    std::vector<std::string> log_lines(episodes);
    Rng base(seed);
    auto run_range = [&](int lo, int hi) {
        auto policy = make_policy(policy_name, loaded ? &loaded->net : nullptr, cfg, budget);
        for (int i = lo; i < hi; ++i) {
            Rng ep = base.split("eval-episode").split(i);
            int lvl = level > 0 ? level : sample_level(1.0, task, ep, hardest);
            std::uint64_t scene_seed = ep.split("scene").next_u64();
            auto st = make_task_episode(task, lvl, scene_seed, cfg.max_steps);
            EpisodeLog log;
            log.level = lvl;
            log.seed = scene_seed;
            results[i] =
                run_episode(std::move(st), *policy, ep.split("policy"), &log, cfg.n_offsets);
            log_lines[i] = episode_log_to_jsonl(log);
        }
    };
    int nworkers = std::max(1, workers);
    if (nworkers == 1) {
        run_range(0, episodes);
    } else {
        std::vector<std::thread> threads;
        int chunk = (episodes + nworkers - 1) / nworkers;
        for (int w = 0; w < nworkers; ++w) {
            int lo = w * chunk, hi = std::min(episodes, (w + 1) * chunk);
            if (lo >= hi) break;
            threads.emplace_back([&, lo, hi]() { run_range(lo, hi); });
        }
        for (auto& t : threads) t.join();
    }
    for (int i = 0; i < episodes; ++i) {
        char name[48];
        std::snprintf(name, sizeof(name), "episode_%06d.jsonl", i);
        std::ofstream(out_dir + "/" + name) << log_lines[i];
    }

    auto stats = summarize(results);
    std::ofstream(out_dir + "/summary.json") << stats_json(stats).dump(2) << "\n";
    RunManifest mf;
    mf.command = "play";
    mf.config = {{"policy", policy_name}, {"task", task_name}, {"episodes", episodes},
                 {"level", level},        {"hardest", hardest}, {"budget", budget},
                 {"seed", seed}};
    if (!checkpoint.empty()) {
        mf.config["checkpoint"] = checkpoint;
        mf.add_input_file(checkpoint + "/params.bin");
    }
    mf.seeds = {seed};
    mf.outputs = {out_dir + "/summary.json"};
    mf.write(out_dir + "/manifest.json");
    std::cout << stats_json(stats).dump(2) << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& resume) {
    std::string path = config_path;
    if (path.empty()) {
        const char* env = std::getenv("BLOCKFORGE_CONFIG");
        if (env) path = env;
    }
    if (path.empty()) {
        std::cerr << "train: no config given (use --config or BLOCKFORGE_CONFIG)\n";
        return kExitConfig;
    }
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        return kExitConfig;
    }
    TrainConfig cfg = train_config_from_json(nlohmann::json::parse(in));
    fs::create_directories(cfg.out_dir);

    Trainer trainer(cfg);
    if (!resume.empty()) trainer.load_state(resume);

    std::ofstream metrics(cfg.out_dir + "/metrics.csv",
                          resume.empty() ? std::ios::trunc : std::ios::app);
    if (resume.empty()) metrics << "step,return_all,return_hardest,loss,eps,level\n";
    trainer.run([&](const MetricsRow& r) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f,%.6f,%d\n", r.step, r.return_all,
                      r.return_hardest, r.loss, r.eps, r.level);
        metrics << buf << std::flush;
        std::cout << "step " << r.step << " return_all " << r.return_all << " loss " << r.loss
                  << "\n";
    });

    save_checkpoint(trainer.net(), cfg, cfg.out_dir + "/checkpoint_final");
    trainer.save_state(cfg.out_dir + "/state");
    RunManifest mf;
    mf.command = "train";
    mf.config = to_json(cfg);
    mf.add_input_file(path);
    mf.seeds = {cfg.seed};
    mf.outputs = {cfg.out_dir + "/checkpoint_final/params.bin", cfg.out_dir + "/metrics.csv"};
    mf.write(cfg.out_dir + "/manifest.json");
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& task_name, int episodes,
             bool hardest, const std::string& budgets_csv, std::uint64_t seed,
             const std::string& out_path, int workers, double min_return) {
    auto loaded = load_checkpoint(checkpoint);
    TrainConfig cfg = loaded.cfg;
    TaskId task = task_name.empty() ? cfg.task_id() : task_from_string(task_name);

    std::vector<int> budgets;
    std::stringstream ss(budgets_csv);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) budgets.push_back(std::stoi(tok));
    if (budgets.empty()) budgets.push_back(0);

    nlohmann::json entries = nlohmann::json::array();
    double best_mean = -1e18;
    for (int budget : budgets) {
        EvalJob job;
        job.task = task;
        job.episodes = episodes;
        job.seed = seed;
        job.hardest_only = hardest;
        job.max_steps = cfg.max_steps;
        job.n_offsets = cfg.n_offsets;
        job.workers = workers;
        auto results = run_eval(job, [&]() -> std::unique_ptr<Policy> {
            return make_policy(budget > 0 ? "dqn-mcts" : "dqn", &loaded.net, cfg, budget);
        });
        auto stats = summarize(std::move(results));
        best_mean = std::max(best_mean, stats.mean_return);
        auto entry = stats_json(stats);
        entry["budget"] = budget;
        entries.push_back(entry);
    }
    nlohmann::json report{{"schema_version", 1},
                          {"task", to_string(task)},
                          {"checkpoint", checkpoint},
                          {"hardest_only", hardest},
                          {"entries", entries}};
    if (!out_path.empty()) {
        auto parent = fs::path(out_path).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        std::ofstream(out_path) << report.dump(2) << "\n";
        RunManifest mf;
        mf.command = "eval";
        mf.config = {{"checkpoint", checkpoint}, {"task", to_string(task)},
                     {"episodes", episodes},     {"hardest", hardest},
                     {"budgets", budgets_csv},   {"seed", seed}};
        mf.add_input_file(checkpoint + "/params.bin");
        mf.seeds = {seed};
        mf.outputs = {out_path};
        mf.write((parent / "manifest.json").string());
    }
    std::cout << report.dump(2) << "\n";
    if (min_return > -1e17 && best_mean < min_return) return kExitThreshold;
    return kExitOk;
}

int cmd_render(const std::string& scene_path, const std::string& episode_path,
               const std::string& out_dir) {
    fs::create_directories(out_dir);
    if (!scene_path.empty()) {
        std::ifstream in(scene_path);
        if (!in) {
            std::cerr << "cannot open " << scene_path << "\n";
            return kExitConfig;
        }
        Scene s = scene_from_json(nlohmann::json::parse(in));
        std::ofstream(out_dir + "/scene.svg") << render_svg(s);
        std::cout << out_dir << "/scene.svg\n";
        return kExitOk;
    }
    if (episode_path.empty()) {
        std::cerr << "render: need --scene or --episode\n";
        return kExitConfig;
    }
    std::ifstream in(episode_path);
    if (!in) {
        std::cerr << "cannot open " << episode_path << "\n";
        return kExitConfig;
    }
    auto log = episode_log_from_jsonl(in);
    EpisodeState st = make_episode(log.initial_scene, log.task, log.max_steps);
    std::ofstream(out_dir + "/step_000.svg") << render_svg(st.scene);
    int k = 1;
    for (const auto& rec : log.steps) {
        ObsGraph g = build_graph(st.scene, st.inventory, Connectivity::Full);
        env_step(st, decode_action(st, g, rec.action));
        char name[32];
        std::snprintf(name, sizeof(name), "step_%03d.svg", k++);
        std::ofstream(out_dir + "/" + name) << render_svg(st.scene);
        if (st.terminated) break;
    }
    std::cout << out_dir << " (" << k << " frames)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"blockforge: 2D block construction tasks, agents, and tools"};
    app.require_subcommand(1);

    std::string g_task = "silhouette", g_out = "scenes";
    int g_level = 0, g_count = 10;
    std::uint64_t g_seed = 0;
    bool g_hardest = false;
    auto* gen = app.add_subcommand("gen", "generate scenes");
    gen->add_option("--task", g_task);
    gen->add_option("--level", g_level, "fixed level (0 = sample the curriculum)");
    gen->add_option("--count", g_count);
    gen->add_option("--seed", g_seed);
    gen->add_option("--out", g_out);
    gen->add_flag("--hardest", g_hardest);

    std::string p_policy = "random", p_task = "silhouette", p_out = "play";
    std::string p_checkpoint, p_replay;
    int p_episodes = 10, p_level = 0, p_budget = 0, p_workers = 1;
    bool p_hardest = false;
    std::uint64_t p_seed = 0;
    auto* play = app.add_subcommand("play", "run or replay episodes");
    play->add_option("--policy", p_policy,
                     "random|heur-silhouette|heur-covering|dqn|dqn-mcts|raw-mcts");
    play->add_option("--task", p_task);
    play->add_option("--episodes", p_episodes);
    play->add_option("--level", p_level);
    play->add_flag("--hardest", p_hardest);
    play->add_option("--budget", p_budget);
    play->add_option("--seed", p_seed);
    play->add_option("--out", p_out);
    play->add_option("--checkpoint", p_checkpoint);
    play->add_option("--workers", p_workers);
    play->add_option("--replay", p_replay, "verify a logged episode instead of playing");

    std::string t_config, t_resume;
    auto* train = app.add_subcommand("train", "train the GN-DQN agent");
    train->add_option("--config", t_config);
    train->add_option("--resume", t_resume, "training-state directory to resume from");

    std::string e_checkpoint, e_task, e_budgets = "0", e_out;
    int e_episodes = 100, e_workers = 1;
    bool e_hardest = false;
    std::uint64_t e_seed = 0;
    double e_min_return = -1e18;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", e_checkpoint)->required();
    eval->add_option("--task", e_task);
    eval->add_option("--episodes", e_episodes);
    eval->add_flag("--hardest", e_hardest);
    eval->add_option("--budgets", e_budgets, "comma-separated MCTS budgets");
    eval->add_option("--seed", e_seed);
    eval->add_option("--out", e_out);
    eval->add_option("--workers", e_workers);
    eval->add_option("--min-return", e_min_return,
                     "exit 3 when the best mean return is lower");

    std::string r_scene, r_episode, r_out = "render";
    auto* render = app.add_subcommand("render", "render scenes or episodes to SVG");
    render->add_option("--scene", r_scene);
    render->add_option("--episode", r_episode);
    render->add_option("--out", r_out);

    CLI11_PARSE(app, argc, argv);
    try {
        if (gen->parsed()) return cmd_gen(g_task, g_level, g_count, g_seed, g_out, g_hardest);
        if (play->parsed())
            return cmd_play(p_policy, p_task, p_episodes, p_level, p_hardest, p_budget, p_seed,
                            p_out, p_checkpoint, p_workers, p_replay);
        if (train->parsed()) return cmd_train(t_config, t_resume);
        if (eval->parsed())
            return cmd_eval(e_checkpoint, e_task, e_episodes, e_hardest, e_budgets, e_seed,
                            e_out, e_workers, e_min_return);
        if (render->parsed()) return cmd_render(r_scene, r_episode, r_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
