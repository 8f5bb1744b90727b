#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "blockforge/actions.hpp"
#include "blockforge/nn/adam.hpp"
#include "blockforge/nn/net.hpp"

namespace blockforge {

// ---------------------------------------------------------------------------
// Adaptive epsilon: p_n = eps / min(L_hat - n, 1), clamped into [eps, 1].
// Exploration rises near the episode's typical end; past it, always explore.

inline double eps_probability(int n, double l_hat, double eps) {
    double denom = std::min(l_hat - n, 1.0);
    if (denom <= 0.0) return 1.0;
    return std::min(1.0, eps / denom);
}

struct EpsSchedule {
    double eps = 0.3;
    double l_hat = 40.0;  // running estimate of typical episode length
    double decay = 0.99;

    double probability(int n) const { return eps_probability(n, l_hat, eps); }
    void observe_episode(int length) { l_hat = decay * l_hat + (1.0 - decay) * length; }
};

// ---------------------------------------------------------------------------
// Replay

struct Transition {
    TaskId task = TaskId::Silhouette;
    Scene scene_before;
    std::array<int, 3> inv_before = {0, 0, 0};
    bool unlimited = true;
    int sender_id = -1, receiver_id = -1, col = 0;  // chosen action
    double reward = 0.0;
    bool terminal = false;
    Scene scene_after;
    std::array<int, 3> inv_after = {0, 0, 0};
};

inline nlohmann::json to_json(const Transition& t) {
    return nlohmann::json{{"task", to_string(t.task)},
                          {"scene_before", to_json(t.scene_before)},
                          {"inv_before", t.inv_before},
                          {"unlimited", t.unlimited},
                          {"sender", t.sender_id},
                          {"receiver", t.receiver_id},
                          {"col", t.col},
                          {"reward", t.reward},
                          {"terminal", t.terminal},
                          {"scene_after", to_json(t.scene_after)},
                          {"inv_after", t.inv_after}};
}

inline Transition transition_from_json(const nlohmann::json& j) {
    Transition t;
    t.task = task_from_string(j.at("task").get<std::string>());
    t.scene_before = scene_from_json(j.at("scene_before"));
    t.inv_before = j.at("inv_before").get<std::array<int, 3>>();
    t.unlimited = j.at("unlimited").get<bool>();
    t.sender_id = j.at("sender").get<int>();
    t.receiver_id = j.at("receiver").get<int>();
    t.col = j.at("col").get<int>();
    t.reward = j.at("reward").get<double>();
    t.terminal = j.at("terminal").get<bool>();
    t.scene_after = scene_from_json(j.at("scene_after"));
    t.inv_after = j.at("inv_after").get<std::array<int, 3>>();
    return t;
}

class Replay {
public:
    explicit Replay(size_t capacity = 100000) : capacity_(capacity) {}

    void push(Transition t) {
        buf_.push_back(std::move(t));
        if (buf_.size() > capacity_) buf_.pop_front();
        produced_ += 1;
    }
    const Transition& sample(Rng& rng) {
        consumed_ += 1;
        return buf_[rng.uniform_int(buf_.size())];
    }
    size_t size() const { return buf_.size(); }
    size_t capacity() const { return capacity_; }
    long long produced() const { return produced_; }
    long long consumed() const { return consumed_; }
    const std::deque<Transition>& contents() const { return buf_; }
    void restore(std::deque<Transition> buf, long long produced, long long consumed) {
        buf_ = std::move(buf);
        produced_ = produced;
        consumed_ = consumed;
    }

private:
    std::deque<Transition> buf_;
    size_t capacity_;
    long long produced_ = 0;
    long long consumed_ = 0;
};

// ---------------------------------------------------------------------------
// Q utilities

struct QView {
    ObsGraph graph;
    nn::Mat q;  // E x (2 * n_offsets)
};

inline QView q_values(const nn::GNParams& net, const Scene& scene, const Inventory& inv,
                      Connectivity conn, bool normalize, int n_rec) {
    QView v;
    v.graph = build_graph(scene, inv, conn, normalize);
    v.q = nn::gn_forward(net, v.graph, n_rec);
    return v;
}

// Argmax over valid entries (action edges x all columns); ties break toward
// the lowest action index (edge order, then column).
struct GreedyPick {
    int edge = -1;  // edge index into graph.edges
    int col = -1;
    double q = -std::numeric_limits<double>::infinity();
};

inline GreedyPick greedy_pick(const nn::Mat& q, const ObsGraph& g) {
    GreedyPick best;
    for (int e : g.action_edges)
        for (int c = 0; c < q.cols; ++c)
            if (q(e, c) > best.q) best = {e, c, q(e, c)};
    return best;
}

// Best next-state value over valid actions only; invalid edges are never
// consulted, no matter their Q entries.
inline double max_valid_q(const nn::Mat& q, const ObsGraph& g) {
    double best = -std::numeric_limits<double>::infinity();
    for (int e : g.action_edges)
        for (int c = 0; c < q.cols; ++c) best = std::max(best, q(e, c));
    return best;
}

inline double td_target(double reward, bool terminal, double gamma, const nn::Mat& next_q,
                        const ObsGraph& next_graph) {
    if (terminal || next_graph.action_edges.empty()) return reward;
    return reward + gamma * max_valid_q(next_q, next_graph);
}

// ---------------------------------------------------------------------------
// DQN learner: Huber TD loss on edge Q values, Adam, periodic target copy.

struct DqnConfig {
    nn::GNConfig gn;
    int n_rec = 3;
    double gamma = 0.98;
    double lr = 1e-4;
    int batch = 16;
    int target_refresh = 500;
    double huber_delta = 1.0;
    Connectivity connectivity = Connectivity::Full;
    bool normalize = true;
};

class DqnLearner {
public:
    DqnLearner(const DqnConfig& cfg, Rng init_rng)
        : cfg_(cfg), net_(nn::GNParams::init(cfg.gn, init_rng)), target_(net_) {
        opt_.lr = cfg.lr;
        opt_.init_like(net_.p);
    }

    const DqnConfig& config() const { return cfg_; }
    const nn::GNParams& net() const { return net_; }
    nn::GNParams& mutable_net() { return net_; }
    const nn::GNParams& target_net() const { return target_; }
    nn::GNParams& mutable_target() { return target_; }
    nn::AdamState& optimizer() { return opt_; }
    const nn::AdamState& optimizer() const { return opt_; }
    long long steps() const { return steps_; }
    void set_steps(long long s) { steps_ = s; }
    void refresh_target() { target_ = net_; }

    double step(Replay& replay, Rng& rng) {
        if (replay.size() < static_cast<size_t>(cfg_.batch))
            throw std::logic_error("replay smaller than batch");

        std::vector<Transition> batch;
        batch.reserve(cfg_.batch);
        for (int i = 0; i < cfg_.batch; ++i) batch.push_back(replay.sample(rng));

        // Batched forward over the "before" graphs.
        nn::GraphSpec spec;
        nn::GraphInputs in;
        in.nodes = nn::Mat(0, cfg_.gn.node_in);
        in.edges = nn::Mat(0, 1);
        in.globs = nn::Mat(0, 1);
        std::vector<std::pair<int, int>> picks;
        nn::Mat targets(cfg_.batch, 1);
        for (int i = 0; i < cfg_.batch; ++i) {
            const Transition& tr = batch[i];
            Inventory inv{tr.inv_before, tr.unlimited};
            ObsGraph g = build_graph(tr.scene_before, inv, cfg_.connectivity, cfg_.normalize);
            int s_node = g.node_of(tr.sender_id), r_node = g.node_of(tr.receiver_id);
            int edge = g.find_edge(s_node, r_node);
            if (edge < 0) throw std::logic_error("transition edge missing from rebuilt graph");
            picks.push_back({spec.n_edges + edge, tr.col});

            Inventory inv_next{tr.inv_after, tr.unlimited};
            if (!tr.terminal) {
                auto next = q_values(target_, tr.scene_after, inv_next, cfg_.connectivity,
                                     cfg_.normalize, cfg_.n_rec);
                targets(i, 0) = td_target(tr.reward, false, cfg_.gamma, next.q, next.graph);
            } else {
                targets(i, 0) = tr.reward;
            }
            nn::append_graph(spec, in, g, cfg_.gn.node_in);
        }

        nn::Tape t;
        auto fw = nn::gn_forward_tape(t, net_, spec, in, cfg_.n_rec, true);
        auto q_sa = t.pick_entries(fw.q_edges, picks);
        auto loss = t.huber_vs(q_sa, targets, cfg_.huber_delta);
        t.backward(loss);

        std::vector<nn::Mat> grads;
        grads.reserve(fw.param_refs.size());
        for (auto r : fw.param_refs) grads.push_back(t.grad(r));
        opt_.step(net_.p, grads);

        steps_ += 1;
        if (steps_ % cfg_.target_refresh == 0) refresh_target();
        return t.val(loss)(0, 0);
    }

private:
    DqnConfig cfg_;
    nn::GNParams net_;
    nn::GNParams target_;
    nn::AdamState opt_;
    long long steps_ = 0;
};

// ---------------------------------------------------------------------------
// Curricula

struct LinearCurriculum {
    long long total_steps = 40000;
    double progress(long long steps) const {
        return std::min(1.0, static_cast<double>(steps) / static_cast<double>(total_steps));
    }
};

// Advance one level when, in every scene group, enough recent episodes beat
// the task's reward-fraction threshold. Groups are keyed by target/obstacle
// counts and quantized heights.
class DynamicCurriculum {
public:
    using GroupKey = std::tuple<int, int, int, int>;

    DynamicCurriculum(TaskId task, int window = 200, int min_episodes = 10)
        : task_(task), window_(window), min_episodes_(min_episodes) {
        if (task == TaskId::Silhouette || task == TaskId::CoveringHard) {
            reward_fraction_ = 0.5;
            episode_fraction_ = 0.5;
        } else {
            reward_fraction_ = 0.25;
            episode_fraction_ = 0.25;
        }
    }

    static GroupKey group_of(const Scene& scene) {
        int n_targets = 0, n_obstacles = 0, t_h = 0, o_h = 0;
        for (const auto& b : scene.bodies) {
            if (b.kind == BodyKind::TargetBlock || b.kind == BodyKind::TargetPoint) {
                n_targets += 1;
                t_h = std::max(t_h, static_cast<int>(std::lround(b.rect.top() / kBlockH)));
            }
            if (b.kind == BodyKind::Obstacle) {
                n_obstacles += 1;
                o_h = std::max(o_h, static_cast<int>(std::lround(b.rect.top() / kBlockH)));
            }
        }
        return {n_targets, t_h, n_obstacles, o_h};
    }

    static double max_reward(const Scene& scene, TaskId task) {
        switch (task) {
            case TaskId::Silhouette: return target_count(scene);
            case TaskId::Connecting: return 3.0;
            case TaskId::Covering:
            case TaskId::CoveringHard: return covering_total_length(scene);
        }
        return 1.0;
    }

    void record(const Scene& initial_scene, double episode_return) {
        double cap = max_reward(initial_scene, task_);
        bool pass = cap > 0.0 && episode_return >= reward_fraction_ * cap;
        auto& dq = stats_[group_of(initial_scene)];
        dq.push_back(pass);
        if (static_cast<int>(dq.size()) > window_) dq.pop_front();
    }

    bool should_advance() const {
        if (stats_.empty()) return false;
        for (const auto& [key, dq] : stats_) {
            if (static_cast<int>(dq.size()) < min_episodes_) return false;
            int good = 0;
            for (bool b : dq) good += b;
            if (good < episode_fraction_ * static_cast<double>(dq.size())) return false;
        }
        return true;
    }

    void advance() {
        level_ = std::min(level_ + 1, max_level(task_));
        stats_.clear();
    }

    int level() const { return level_; }
    void set_level(int l) { level_ = l; }
    double progress() const { return static_cast<double>(level_) / max_level(task_); }

    nlohmann::json to_json() const {
        nlohmann::json groups = nlohmann::json::array();
        for (const auto& [k, dq] : stats_) {
            groups.push_back({{"key", {std::get<0>(k), std::get<1>(k), std::get<2>(k),
                                       std::get<3>(k)}},
                              {"window", std::vector<bool>(dq.begin(), dq.end())}});
        }
        return {{"level", level_}, {"groups", groups}};
    }
    void load_json(const nlohmann::json& j) {
        level_ = j.at("level").get<int>();
        stats_.clear();
        for (const auto& gj : j.at("groups")) {
            auto k = gj.at("key");
            GroupKey key{k.at(0).get<int>(), k.at(1).get<int>(), k.at(2).get<int>(),
                         k.at(3).get<int>()};
            std::deque<bool> dq;
            for (bool b : gj.at("window").get<std::vector<bool>>()) dq.push_back(b);
            stats_[key] = std::move(dq);
        }
    }

private:
    TaskId task_;
    int window_;
    int min_episodes_;
    double reward_fraction_ = 0.5;
    double episode_fraction_ = 0.5;
    int level_ = 1;
    std::map<GroupKey, std::deque<bool>> stats_;
};

// ---------------------------------------------------------------------------
// Transition-model losses

// l = ||o - o'||_2 + ||r - r'||_2 + KL((g, 1-g) || (g', 1-g'))
inline double model_single_step_loss(const std::vector<double>& o_pred, double r_pred,
                                     double g_pred, const std::vector<double>& o_true,
                                     double r_true, double g_true) {
    if (o_pred.size() != o_true.size())
        throw std::invalid_argument("observation size mismatch");
    double sq = 0.0;
    for (size_t i = 0; i < o_pred.size(); ++i) {
        double d = o_pred[i] - o_true[i];
        sq += d * d;
    }
    auto clamp01 = [](double g) { return std::clamp(g, 1e-6, 1.0 - 1e-6); };
    double p = clamp01(g_pred), q = clamp01(g_true);
    double kl = p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    return std::sqrt(sq) + std::abs(r_pred - r_true) + kl;
}

// Sum of single-step losses along recursively predicted observations:
// the model re-consumes its own prediction for n = 0 .. n_unroll-1.
template <typename Act, typename Model>
double model_unrolled_loss(Model&& model, const std::vector<std::vector<double>>& obs,
                           const std::vector<Act>& actions, const std::vector<double>& rewards,
                           const std::vector<double>& discounts, int n_unroll) {
    if (static_cast<int>(obs.size()) < n_unroll + 1 ||
        static_cast<int>(actions.size()) < n_unroll)
        throw std::invalid_argument("window shorter than n_unroll");
    double total = 0.0;
    std::vector<double> pred = obs[0];
    for (int n = 0; n < n_unroll; ++n) {
        auto [o_next, r, g] = model(pred, actions[n]);
        total += model_single_step_loss(o_next, r, g, obs[n + 1], rewards[n], discounts[n]);
        pred = std::move(o_next);
    }
    return total;
}

}  // namespace blockforge
