#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "blockforge/episode.hpp"
#include "blockforge/learn.hpp"

namespace blockforge {

struct TrainConfig {
    std::string task = "silhouette";
    std::uint64_t seed = 0;
    int fixed_level = 0;  // > 0 trains on a single level
    bool hardest_only = false;
    int n_rec = 3;
    int n_offsets = 15;
    int latent = 16;
    std::string connectivity = "full";
    bool normalize = true;
    double gamma = 0.98;
    double lr = 1e-4;
    int batch = 16;
    int replay_capacity = 100000;
    int replay_ratio = 4;
    int target_refresh = 500;
    double epsilon = 0.3;
    std::string curriculum = "linear";  // linear | dynamic
    long long curriculum_steps = 40000;
    int budget_train = 0;  // MCTS budget while acting; 0 = plain DQN
    int max_steps = 40;
    long long learner_steps = 2000;
    int eval_every = 250;
    int eval_episodes = 50;
    double early_stop_completed = -1.0;  // stop once greedy eval reaches this rate
    int early_stop_episodes = 500;
    int checkpoint_every = 0;  // 0: only final
    std::string out_dir = "run";

    TaskId task_id() const { return task_from_string(task); }
    Connectivity conn() const {
        return connectivity == "sparse" ? Connectivity::Sparse : Connectivity::Full;
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return nlohmann::json{{"task", c.task},
                          {"seed", c.seed},
                          {"fixed_level", c.fixed_level},
                          {"hardest_only", c.hardest_only},
                          {"n_rec", c.n_rec},
                          {"n_offsets", c.n_offsets},
                          {"latent", c.latent},
                          {"connectivity", c.connectivity},
                          {"normalize", c.normalize},
                          {"gamma", c.gamma},
                          {"lr", c.lr},
                          {"batch", c.batch},
                          {"replay_capacity", c.replay_capacity},
                          {"replay_ratio", c.replay_ratio},
                          {"target_refresh", c.target_refresh},
                          {"epsilon", c.epsilon},
                          {"curriculum", c.curriculum},
                          {"curriculum_steps", c.curriculum_steps},
                          {"budget_train", c.budget_train},
                          {"max_steps", c.max_steps},
                          {"learner_steps", c.learner_steps},
                          {"eval_every", c.eval_every},
                          {"eval_episodes", c.eval_episodes},
                          {"early_stop_completed", c.early_stop_completed},
                          {"early_stop_episodes", c.early_stop_episodes},
                          {"checkpoint_every", c.checkpoint_every},
                          {"out_dir", c.out_dir}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("task", c.task);
    get("seed", c.seed);
    get("fixed_level", c.fixed_level);
    get("hardest_only", c.hardest_only);
    get("n_rec", c.n_rec);
    get("n_offsets", c.n_offsets);
    get("latent", c.latent);
    get("connectivity", c.connectivity);
    get("normalize", c.normalize);
    get("gamma", c.gamma);
    get("lr", c.lr);
    get("batch", c.batch);
    get("replay_capacity", c.replay_capacity);
    get("replay_ratio", c.replay_ratio);
    get("target_refresh", c.target_refresh);
    get("epsilon", c.epsilon);
    get("curriculum", c.curriculum);
    get("curriculum_steps", c.curriculum_steps);
    get("budget_train", c.budget_train);
    get("max_steps", c.max_steps);
    get("learner_steps", c.learner_steps);
    get("eval_every", c.eval_every);
    get("eval_episodes", c.eval_episodes);
    get("early_stop_completed", c.early_stop_completed);
    get("early_stop_episodes", c.early_stop_episodes);
    get("checkpoint_every", c.checkpoint_every);
    get("out_dir", c.out_dir);
    return c;
}

struct MetricsRow {
    long long step = 0;
    double return_all = 0.0;
    double return_hardest = 0.0;
    double loss = 0.0;
    double eps = 0.0;
    int level = 1;
};

// Synchronous single-process actor/learner loop: each learner step consumes
// `batch` samples after exactly batch / replay_ratio fresh transitions were
// produced, so the replay ratio holds by construction.
class Trainer {
public:
    explicit Trainer(const TrainConfig& cfg)
        : cfg_(cfg),
          task_(cfg.task_id()),
          master_(cfg.seed),
          learner_(make_dqn_config(cfg), Rng(cfg.seed).split("init")),
          replay_(cfg.replay_capacity),
          dynamic_(task_) {
        schedule_.eps = cfg.epsilon;
        schedule_.l_hat = cfg.max_steps;
        sample_rng_ = master_.split("sample");
        episode_index_ = 0;
    }

    static DqnConfig make_dqn_config(const TrainConfig& cfg) {
        DqnConfig d;
        d.gn.latent = cfg.latent;
        d.gn.n_offsets = cfg.n_offsets;
        d.n_rec = cfg.n_rec;
        d.gamma = cfg.gamma;
        d.lr = cfg.lr;
        d.batch = cfg.batch;
        d.target_refresh = cfg.target_refresh;
        d.connectivity = cfg.conn();
        d.normalize = cfg.normalize;
        return d;
    }

    const TrainConfig& config() const { return cfg_; }
    const nn::GNParams& net() const { return learner_.net(); }
    DqnLearner& learner() { return learner_; }
    Replay& replay() { return replay_; }
    const EpsSchedule& schedule() const { return schedule_; }
    const std::vector<MetricsRow>& metrics() const { return metrics_; }
    long long episodes_played() const { return episode_index_; }

    double curriculum_progress() const {
        if (cfg_.curriculum == "dynamic") return dynamic_.progress();
        return linear_.progress(learner_.steps());
    }
    int current_level_cap() const {
        return std::clamp(static_cast<int>(std::ceil(curriculum_progress() * max_level(task_))),
                          1, max_level(task_));
    }

    // Runs until learner_steps (or early stop); appends metrics rows.
    void run(const std::function<void(const MetricsRow&)>& on_metrics = nullptr) {
        linear_.total_steps = cfg_.curriculum_steps;
        const int produce_per_step = std::max(1, cfg_.batch / cfg_.replay_ratio);
        while (learner_.steps() < cfg_.learner_steps) {
            int need = static_cast<int>(replay_.size()) < cfg_.batch
                           ? cfg_.batch - static_cast<int>(replay_.size())
                           : produce_per_step;
            for (int i = 0; i < need; ++i) produce_one_transition();
            double loss = learner_.step(replay_, sample_rng_);

            if (cfg_.curriculum == "dynamic" && dynamic_.should_advance()) dynamic_.advance();

            if (cfg_.eval_every > 0 && learner_.steps() % cfg_.eval_every == 0) {
                MetricsRow row = eval_row(loss);
                metrics_.push_back(row);
                if (on_metrics) on_metrics(row);
                if (cfg_.early_stop_completed > 0.0 &&
                    last_eval_completed_ >= cfg_.early_stop_completed) {
                    auto stats = greedy_eval(cfg_.early_stop_episodes, /*hardest=*/false);
                    if (stats.completed_rate >= cfg_.early_stop_completed) break;
                }
            }
            if (cfg_.checkpoint_every > 0 && learner_.steps() % cfg_.checkpoint_every == 0)
                save_state(cfg_.out_dir + "/state");
        }
    }

    EvalStats greedy_eval(int episodes, bool hardest) {
        EvalJob job;
        job.task = task_;
        job.episodes = episodes;
        job.seed = master_.split("eval").split(static_cast<std::uint64_t>(learner_.steps())).key();
        job.hardest_only = hardest || cfg_.hardest_only;
        job.fixed_level = cfg_.fixed_level;
        job.progress = curriculum_progress();
        job.max_steps = cfg_.max_steps;
        job.n_offsets = cfg_.n_offsets;
        auto results = run_eval(job, [&]() -> std::unique_ptr<Policy> {
            return std::make_unique<GreedyQPolicy>(&learner_.net(), cfg_.n_rec, cfg_.conn(),
                                                   cfg_.normalize);
        });
        return summarize(std::move(results));
    }

    // --- state serialization (exact resume) -------------------------------

    void save_state(const std::string& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        nn::save_params(learner_.net().p, dir + "/params.bin", dir + "/params.json");
        nn::save_params(learner_.target_net().p, dir + "/target.bin", dir + "/target.json");
        // optimizer moments stored as a params archive with prefixed names
        nn::Params opt;
        const nn::AdamState& o = learner_.optimizer();
        for (size_t i = 0; i < o.m.size(); ++i) {
            opt.add("m." + learner_.net().p.names[i], o.m[i]);
            opt.add("v." + learner_.net().p.names[i], o.v[i]);
        }
        nn::save_params(opt, dir + "/adam.bin", dir + "/adam.json");

        std::ofstream replay_out(dir + "/replay.jsonl");
        for (const auto& t : replay_.contents()) replay_out << to_json(t).dump() << "\n";

        nlohmann::json st{
            {"version", 1},
            {"config", to_json(cfg_)},
            {"learner_steps", learner_.steps()},
            {"adam_t", o.t},
            {"episode_index", episode_index_},
            {"produced", replay_.produced()},
            {"consumed", replay_.consumed()},
            {"l_hat", schedule_.l_hat},
            {"sample_ctr", sample_rng_.counter()},
            {"dynamic", dynamic_.to_json()},
            {"quick_rate", quick_completed_rate_},
            {"episode",
             current_
                 ? nlohmann::json{{"scene", to_json(current_->scene)},
                                  {"counts", current_->inventory.counts},
                                  {"unlimited", current_->inventory.unlimited},
                                  {"step", current_->step},
                                  {"accrued", current_->accrued_reward},
                                  {"level", current_level_},
                                  {"explore_ctr", explore_rng_.counter()}}
                 : nlohmann::json(nullptr)}};
        std::ofstream(dir + "/state.json") << st.dump(2) << "\n";
    }

    void load_state(const std::string& dir) {
        std::ifstream in(dir + "/state.json");
        if (!in) throw std::runtime_error("no training state at " + dir);
        nlohmann::json st = nlohmann::json::parse(in);
        nn::load_params(learner_.mutable_net().p, dir + "/params.bin", dir + "/params.json");
        nn::load_params(learner_.mutable_target().p, dir + "/target.bin",
                        dir + "/target.json");
        auto& o = learner_.optimizer();
        nn::Params opt;
        for (size_t i = 0; i < learner_.net().p.t.size(); ++i) {
            opt.add("m." + learner_.net().p.names[i],
                    nn::Mat(learner_.net().p.t[i].rows, learner_.net().p.t[i].cols));
            opt.add("v." + learner_.net().p.names[i],
                    nn::Mat(learner_.net().p.t[i].rows, learner_.net().p.t[i].cols));
        }
        nn::load_params(opt, dir + "/adam.bin", dir + "/adam.json");
        for (size_t i = 0; i < o.m.size(); ++i) {
            o.m[i] = opt.t[2 * i];
            o.v[i] = opt.t[2 * i + 1];
        }
        o.t = st.at("adam_t").get<long long>();
        learner_.set_steps(st.at("learner_steps").get<long long>());
        episode_index_ = st.at("episode_index").get<long long>();
        schedule_.l_hat = st.at("l_hat").get<double>();
        sample_rng_ = master_.split("sample");
        sample_rng_.set_counter(st.at("sample_ctr").get<std::uint64_t>());
        dynamic_.load_json(st.at("dynamic"));
        quick_completed_rate_ = st.at("quick_rate").get<double>();

        std::deque<Transition> buf;
        std::ifstream rin(dir + "/replay.jsonl");
        std::string line;
        while (std::getline(rin, line))
            if (!line.empty()) buf.push_back(transition_from_json(nlohmann::json::parse(line)));
        replay_.restore(std::move(buf), st.at("produced").get<long long>(),
                        st.at("consumed").get<long long>());

        if (!st.at("episode").is_null()) {
            const auto& ej = st.at("episode");
            EpisodeState cur;
            cur.scene = scene_from_json(ej.at("scene"));
            cur.inventory.counts = ej.at("counts").get<std::array<int, 3>>();
            cur.inventory.unlimited = ej.at("unlimited").get<bool>();
            cur.task = task_;
            cur.step = ej.at("step").get<int>();
            cur.max_steps = cfg_.max_steps;
            cur.accrued_reward = ej.at("accrued").get<double>();
            current_ = cur;
            current_level_ = ej.at("level").get<int>();
            explore_rng_ = master_.split("explore").split(episode_index_);
            explore_rng_.set_counter(ej.at("explore_ctr").get<std::uint64_t>());
        } else {
            current_.reset();
        }
    }

private:
    void begin_episode() {
        Rng ep = master_.split("episode").split(episode_index_);
        if (cfg_.fixed_level > 0) {
            current_level_ = cfg_.fixed_level;
        } else {
            current_level_ = sample_level(curriculum_progress(), task_, ep, cfg_.hardest_only);
        }
        current_ = make_task_episode(task_, current_level_, ep.split("scene").next_u64(),
                                     cfg_.max_steps);
        initial_scene_ = current_->scene;
        explore_rng_ = master_.split("explore").split(episode_index_);
    }

    void produce_one_transition() {
        if (!current_ || current_->terminated) begin_episode();
        EpisodeState& st = *current_;

        ObsGraph g = build_graph(st.scene, st.inventory, cfg_.conn(), cfg_.normalize);
        ActionKey key{};
        double p = schedule_.probability(st.step);
        bool explore = explore_rng_.uniform() < p;
        if (explore || g.action_edges.empty()) {
            if (g.action_edges.empty()) {
                finish_episode(st.accrued_reward);
                return;
            }
            int e = g.action_edges[explore_rng_.uniform_int(g.action_edges.size())];
            key = {g.body_ids[g.edges[e].first], g.body_ids[g.edges[e].second],
                   static_cast<int>(explore_rng_.uniform_int(2 * cfg_.n_offsets))};
        } else if (cfg_.budget_train > 0) {
            PlanConfig pc;
            pc.budget = cfg_.budget_train;
            pc.n_rec = cfg_.n_rec;
            pc.n_offsets = cfg_.n_offsets;
            pc.connectivity = cfg_.conn();
            pc.normalize = cfg_.normalize;
            PerfectModel model(st, cfg_.n_offsets);
            Mcts search(&learner_.net(), pc);
            Rng plan_rng = explore_rng_.split("plan").split(st.step);
            key = search.plan(model, plan_rng);
        } else {
            nn::Mat q = nn::gn_forward(learner_.net(), g, cfg_.n_rec);
            auto pick = greedy_pick(q, g);
            key = {g.body_ids[g.edges[pick.edge].first], g.body_ids[g.edges[pick.edge].second],
                   pick.col};
        }

        Transition tr;
        tr.task = task_;
        tr.scene_before = st.scene;
        tr.inv_before = st.inventory.counts;
        tr.unlimited = st.inventory.unlimited;
        tr.sender_id = key.sender_id;
        tr.receiver_id = key.receiver_id;
        tr.col = key.col;

        DiscRel act{key.sender_id, key.receiver_id, col_offset_index(key.col),
                    col_sticky(key.col) ? 1 : -1};
        auto req = decode_disc_rel(st, g, act, cfg_.n_offsets);
        auto res = env_step(st, req);
        tr.reward = res.reward;
        tr.terminal = res.done;
        tr.scene_after = st.scene;
        tr.inv_after = st.inventory.counts;
        replay_.push(std::move(tr));

        if (res.done) finish_episode(st.accrued_reward);
    }

    void finish_episode(double episode_return) {
        schedule_.observe_episode(current_->step);
        recent_returns_.push_back(episode_return);
        recent_completed_.push_back(current_->terminated == TerminationReason::Completed);
        if (recent_returns_.size() > 100) {
            recent_returns_.pop_front();
            recent_completed_.pop_front();
        }
        int done = 0;
        for (bool b : recent_completed_) done += b;
        quick_completed_rate_ =
            recent_completed_.empty() ? 0.0 : static_cast<double>(done) / recent_completed_.size();
        if (cfg_.curriculum == "dynamic") dynamic_.record(initial_scene_, episode_return);
        current_->terminated = current_->terminated.value_or(TerminationReason::MaxSteps);
        current_.reset();
        episode_index_ += 1;
    }

    MetricsRow eval_row(double loss) {
        MetricsRow row;
        row.step = learner_.steps();
        row.loss = loss;
        row.eps = schedule_.probability(0);
        row.level = current_level_cap();
        auto all = greedy_eval(cfg_.eval_episodes, false);
        auto hardest = greedy_eval(std::max(1, cfg_.eval_episodes / 2), true);
        row.return_all = all.mean_return;
        row.return_hardest = hardest.mean_return;
        last_eval_completed_ = all.completed_rate;
        return row;
    }

    TrainConfig cfg_;
    TaskId task_;
    Rng master_;
    DqnLearner learner_;
    Replay replay_;
    EpsSchedule schedule_;
    LinearCurriculum linear_;
    DynamicCurriculum dynamic_;
    Rng sample_rng_, explore_rng_;
    std::optional<EpisodeState> current_;
    Scene initial_scene_;
    int current_level_ = 1;
    long long episode_index_ = 0;
    double last_eval_completed_ = 0.0;
    double quick_completed_rate_ = 0.0;
    std::deque<double> recent_returns_;
    std::deque<bool> recent_completed_;
    std::vector<MetricsRow> metrics_;
};

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "step,return_all,return_hardest,loss,eps,level\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f,%.6f,%d\n", r.step, r.return_all,
                      r.return_hardest, r.loss, r.eps, r.level);
        out << buf;
    }
    return out.str();
}

}  // namespace blockforge
