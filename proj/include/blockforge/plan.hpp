#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "blockforge/learn.hpp"

namespace blockforge {

// A discrete-relative action identified robustly across graph rebuilds.
struct ActionKey {
    int sender_id = -1;
    int receiver_id = -1;
    int col = 0;  // 2 * offset_index + sticky

    bool operator==(const ActionKey&) const = default;
    auto operator<=>(const ActionKey&) const = default;
};

// Perfect transition model: states are values reached by replaying a unique
// action sequence from the episode's initial state, so (initial state,
// sequence) -> state is pure. Reached states are memoized by handle.
class PerfectModel {
public:
    explicit PerfectModel(EpisodeState root, int n_offsets = 15)
        : n_offsets_(n_offsets) {
        states_.push_back(std::move(root));
    }

    int root() const { return 0; }
    const EpisodeState& state(int h) const { return states_.at(h); }

    struct Out {
        int state = -1;
        double reward = 0.0;
        bool terminal = false;
    };

    Out apply(int h, const ActionKey& a) {
        EpisodeState next = states_.at(h);
        ObsGraph g = build_graph(next.scene, next.inventory, Connectivity::Full);
        DiscRel act{a.sender_id, a.receiver_id, col_offset_index(a.col), col_sticky(a.col) ? 1 : -1};
        auto req = decode_disc_rel(next, g, act, n_offsets_);
        auto res = env_step(next, req);
        states_.push_back(std::move(next));
        return {static_cast<int>(states_.size()) - 1, res.reward, res.done};
    }

    int n_offsets() const { return n_offsets_; }

private:
    int n_offsets_;
    std::vector<EpisodeState> states_;
};

struct PlanConfig {
    int budget = 0;
    double c_uct = 2.0;
    int expand_k = 16;          // actions expanded per node (top prior / random)
    bool full_expansion = false;  // expand every enumerable action instead
    bool use_prior = true;      // false = raw MCTS
    double rollout_eps = 0.1;   // epsilon-greedy rollouts over the prior
    int n_rec = 3;
    int n_offsets = 15;
    Connectivity connectivity = Connectivity::Full;
    bool normalize = true;
};

struct PlanTraceEntry {
    int iteration = 0;
    std::vector<int> path;  // action indices from the root
    double backup_return = 0.0;
    bool expanded = false;
};

// Monte-Carlo tree search over action sequences with Q-function priors and
// two-stage (edge, then offset/sticky) UCT selection.
class Mcts {
public:
    struct ActionStat {
        ActionKey key;
        double prior = 0.0;
        double reward = 0.0;  // immediate reward, known once the child exists
        double ret_sum = 0.0;
        int rollouts = 0;
        int child = -1;
        int visits() const { return 1 + rollouts; }
    };

    struct Node {
        int state = -1;
        bool terminal = false;
        bool has_prior = false;
        double max_prior = 0.0;
        std::vector<ActionStat> acts;

        int total_visits() const {
            int n = 0;
            for (const auto& a : acts) n += a.visits();
            return n;
        }
    };

    Mcts(const nn::GNParams* net, const PlanConfig& cfg) : net_(net), cfg_(cfg) {
        if (cfg.use_prior && net == nullptr)
            throw std::invalid_argument("prior-guided search needs a network");
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<PlanTraceEntry>& trace() const { return trace_; }

    // Node value per the prior-regularized visit average: the max expanded
    // prior plus all backed-up returns through the node, over total visits.
    double node_value(const Node& nd) const {
        if (nd.acts.empty()) throw std::logic_error("node_value on unexpanded node");
        double total = cfg_.use_prior ? nd.max_prior : 0.0;
        for (const auto& a : nd.acts) total += a.ret_sum;
        return total / nd.total_visits();
    }

    // Per-action value: the action's own prior plus its backed-up returns,
    // over its visit count. Reduces to the prior when unvisited.
    double action_value(const ActionStat& a) const {
        double total = (cfg_.use_prior ? a.prior : 0.0) + a.ret_sum;
        return total / a.visits();
    }

    // Two-stage UCT: pick the edge group first, then the offset within it.
    int select_action(const Node& nd) const {
        double ln_n = std::log(static_cast<double>(nd.total_visits()));
        std::map<std::pair<int, int>, std::vector<int>> groups;
        for (size_t i = 0; i < nd.acts.size(); ++i)
            groups[{nd.acts[i].key.sender_id, nd.acts[i].key.receiver_id}].push_back(
                static_cast<int>(i));

        const std::vector<int>* best_group = nullptr;
        double best_score = -std::numeric_limits<double>::infinity();
        for (const auto& [key, idxs] : groups) {
            double best_v = -std::numeric_limits<double>::infinity();
            int group_visits = 0;
            for (int i : idxs) {
                best_v = std::max(best_v, action_value(nd.acts[i]));
                group_visits += nd.acts[i].visits();
            }
            double score = best_v + cfg_.c_uct * std::sqrt(ln_n / group_visits);
            if (score > best_score) {
                best_score = score;
                best_group = &idxs;
            }
        }
        int best_i = -1;
        double best_a = -std::numeric_limits<double>::infinity();
        for (int i : *best_group) {
            double score =
                action_value(nd.acts[i]) + cfg_.c_uct * std::sqrt(ln_n / nd.acts[i].visits());
            if (score > best_a) {
                best_a = score;
                best_i = i;
            }
        }
        return best_i;
    }

    // Single-stage UCT over all actions; reference for the reduction tests.
    int select_action_flat(const Node& nd) const {
        double ln_n = std::log(static_cast<double>(nd.total_visits()));
        int best_i = -1;
        double best = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < nd.acts.size(); ++i) {
            double score = action_value(nd.acts[i]) +
                           cfg_.c_uct * std::sqrt(ln_n / nd.acts[i].visits());
            if (score > best) {
                best = score;
                best_i = static_cast<int>(i);
            }
        }
        return best_i;
    }

    // Runs `budget` select-expand-rollout-backup iterations and returns the
    // most-visited root action. Budget 0 returns the greedy prior argmax.
    ActionKey plan(PerfectModel& model, Rng& rng) {
        nodes_.clear();
        trace_.clear();
        const EpisodeState& root_state = model.state(model.root());
        if (cfg_.budget <= 0) return greedy_root(root_state);

        nodes_.push_back(make_node(model, model.root(), rng));
        if (nodes_[0].acts.empty()) return ActionKey{};

        for (int it = 0; it < cfg_.budget; ++it) {
            PlanTraceEntry te;
            te.iteration = it;
            int cur = 0;
            std::vector<std::pair<int, int>> path;  // (node, action index)
            double tail_return = 0.0;
            while (true) {
                Node& nd = nodes_[cur];
                if (nd.terminal || nd.acts.empty()) break;
                int ai = select_action(nd);
                path.push_back({cur, ai});
                te.path.push_back(ai);
                if (nd.acts[ai].child < 0) {
                    auto out = model.apply(nd.state, nd.acts[ai].key);
                    int child = static_cast<int>(nodes_.size());
                    if (out.terminal) {
                        Node leaf;
                        leaf.state = out.state;
                        leaf.terminal = true;
                        nodes_.push_back(leaf);
                    } else {
                        nodes_.push_back(make_node(model, out.state, rng));
                        tail_return = rollout(model, out.state, rng);
                    }
                    nodes_[cur].acts[ai].child = child;
                    nodes_[cur].acts[ai].reward = out.reward;
                    te.expanded = true;
                    break;
                }
                cur = nd.acts[ai].child;
            }
            // Backup: each traversed (s, a) accumulates the return measured
            // from its own decision point.
            double g = tail_return;
            for (auto it2 = path.rbegin(); it2 != path.rend(); ++it2) {
                auto& stat = nodes_[it2->first].acts[it2->second];
                g = stat.reward + g;
                stat.ret_sum += g;
                stat.rollouts += 1;
            }
            te.backup_return = g;
            trace_.push_back(te);
        }

        // argmax visit count; ties by value, then action order.
        const Node& root = nodes_[0];
        int best = 0;
        for (size_t i = 1; i < root.acts.size(); ++i) {
            const auto &a = root.acts[i], &b = root.acts[best];
            if (a.visits() > b.visits() ||
                (a.visits() == b.visits() && action_value(a) > action_value(b)))
                best = static_cast<int>(i);
        }
        return root.acts[best].key;
    }

private:
    ActionKey greedy_root(const EpisodeState& st) const {
        auto view = q_values(*net_, st.scene, st.inventory, cfg_.connectivity, cfg_.normalize,
                             cfg_.n_rec);
        auto pick = greedy_pick(view.q, view.graph);
        if (pick.edge < 0) return ActionKey{};
        return ActionKey{view.graph.body_ids[view.graph.edges[pick.edge].first],
                         view.graph.body_ids[view.graph.edges[pick.edge].second], pick.col};
    }

    Node make_node(PerfectModel& model, int state_h, Rng& rng) {
        Node nd;
        nd.state = state_h;
        const EpisodeState& st = model.state(state_h);
        ObsGraph g = build_graph(st.scene, st.inventory, cfg_.connectivity, cfg_.normalize);
        std::vector<ActionStat> all;
        nn::Mat q;
        if (cfg_.use_prior) {
            q = nn::gn_forward(*net_, g, cfg_.n_rec);
            nd.has_prior = true;
        }
        for (int e : g.action_edges) {
            ActionKey key{g.body_ids[g.edges[e].first], g.body_ids[g.edges[e].second], 0};
            for (int c = 0; c < 2 * cfg_.n_offsets; ++c) {
                ActionStat s;
                s.key = key;
                s.key.col = c;
                s.prior = cfg_.use_prior ? q(e, c) : 0.0;
                all.push_back(s);
            }
        }
        if (all.empty()) return nd;

        if (cfg_.full_expansion || static_cast<int>(all.size()) <= cfg_.expand_k) {
            nd.acts = std::move(all);
        } else if (cfg_.use_prior) {
            // top-k by prior, stable on ties
            std::vector<int> order(all.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return all[a].prior > all[b].prior; });
            for (int i = 0; i < cfg_.expand_k; ++i) nd.acts.push_back(all[order[i]]);
        } else {
            // raw search: k distinct uniform actions
            std::vector<int> order(all.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            for (int i = 0; i < cfg_.expand_k; ++i) {
                int j = i + static_cast<int>(rng.uniform_int(order.size() - i));
                std::swap(order[i], order[j]);
                nd.acts.push_back(all[order[i]]);
            }
        }
        for (const auto& a : nd.acts) nd.max_prior = std::max(nd.max_prior, a.prior);
        return nd;
    }

    // Undiscounted episode-remainder rollout; the environment's step cap
    // bounds the depth.
    double rollout(PerfectModel& model, int state_h, Rng& rng) {
        double total = 0.0;
        int cur = state_h;
        while (true) {
            const EpisodeState& st = model.state(cur);
            if (st.terminated) break;
            ObsGraph g = build_graph(st.scene, st.inventory, cfg_.connectivity, cfg_.normalize);
            if (g.action_edges.empty()) break;
            ActionKey key;
            bool random_move = !cfg_.use_prior || rng.uniform() < cfg_.rollout_eps;
            if (random_move) {
                int e = g.action_edges[rng.uniform_int(g.action_edges.size())];
                key = {g.body_ids[g.edges[e].first], g.body_ids[g.edges[e].second],
                       static_cast<int>(rng.uniform_int(2 * cfg_.n_offsets))};
            } else {
                nn::Mat q = nn::gn_forward(*net_, g, cfg_.n_rec);
                auto pick = greedy_pick(q, g);
                key = {g.body_ids[g.edges[pick.edge].first],
                       g.body_ids[g.edges[pick.edge].second], pick.col};
            }
            auto out = model.apply(cur, key);
            total += out.reward;
            cur = out.state;
            if (out.terminal) break;
        }
        return total;
    }

    const nn::GNParams* net_;
    PlanConfig cfg_;
    std::vector<Node> nodes_;
    std::vector<PlanTraceEntry> trace_;
};

}  // namespace blockforge
