#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "blockforge/agents.hpp"
#include "blockforge/plan.hpp"

using namespace blockforge;

namespace {

PlanConfig tiny_plan(int budget, bool prior) {
    PlanConfig pc;
    pc.budget = budget;
    pc.use_prior = prior;
    pc.n_rec = 2;
    pc.n_offsets = 5;
    pc.expand_k = 8;
    return pc;
}

nn::GNParams tiny_net(std::uint64_t seed) {
    nn::GNConfig cfg;
    cfg.latent = 6;
    cfg.n_offsets = 5;
    return nn::GNParams::init(cfg, Rng(seed));
}

}  // namespace

TEST_CASE("node_value matches the worked examples") {
    auto net = tiny_net(1);
    Mcts search(&net, tiny_plan(1, true));
    Mcts::Node nd;
    nd.acts.resize(2);
    nd.acts[0].prior = 0.2;
    nd.acts[1].prior = 0.8;
    nd.max_prior = 0.8;

    // two expanded actions, no rollouts: N(s) = 2, V = max Q / 2
    REQUIRE(search.node_value(nd) == Catch::Approx(0.4));

    // one rollout return of 1.0 through action 1: N(s) = 3, V = 1.8 / 3
    nd.acts[1].rollouts = 1;
    nd.acts[1].ret_sum = 1.0;
    REQUIRE(search.node_value(nd) == Catch::Approx(0.6));

    // raw mode drops the prior term: V = 1.0 / N(s)
    Mcts raw(nullptr, tiny_plan(1, false));
    REQUIRE(raw.node_value(nd) == Catch::Approx(1.0 / 3.0));

    Mcts::Node empty;
    REQUIRE_THROWS_AS(search.node_value(empty), std::logic_error);
}

TEST_CASE("two-stage selection: degenerate group equals flat UCT") {
    auto net = tiny_net(2);
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        Rng r = rng.split(trial);
        Mcts search(&net, tiny_plan(1, true));
        Mcts::Node nd;
        // one edge, several offsets -> grouping is a single group
        int n = 2 + static_cast<int>(r.uniform_int(6));
        for (int i = 0; i < n; ++i) {
            Mcts::ActionStat a;
            a.key = {1, 2, i};
            a.prior = r.uniform(-1, 1);
            a.rollouts = static_cast<int>(r.uniform_int(4));
            a.ret_sum = a.rollouts * r.uniform(-1, 1);
            nd.acts.push_back(a);
        }
        REQUIRE(search.select_action(nd) == search.select_action_flat(nd));
    }
}

TEST_CASE("two-stage selection: reduction with one offset per edge") {
    auto net = tiny_net(2);
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        Rng r = rng.split(trial);
        Mcts search(&net, tiny_plan(1, true));
        Mcts::Node nd;
        int n = 2 + static_cast<int>(r.uniform_int(6));
        for (int i = 0; i < n; ++i) {
            Mcts::ActionStat a;
            a.key = {10 + i, 2, 0};  // distinct edges, single offset each
            a.prior = r.uniform(-1, 1);
            a.rollouts = static_cast<int>(r.uniform_int(4));
            a.ret_sum = a.rollouts * r.uniform(-1, 1);
            nd.acts.push_back(a);
        }
        REQUIRE(search.select_action(nd) == search.select_action_flat(nd));
    }
}

TEST_CASE("selection prefers the least-visited group on equal values") {
    auto net = tiny_net(5);
    Mcts search(&net, tiny_plan(1, true));
    Mcts::Node nd;
    for (int g = 0; g < 2; ++g)
        for (int i = 0; i < 2; ++i) {
            Mcts::ActionStat a;
            a.key = {100 + g, 7, i};
            a.prior = 0.5;  // equal values everywhere
            a.rollouts = g == 0 ? 3 : 0;
            a.ret_sum = a.rollouts * 0.5;
            nd.acts.push_back(a);
        }
    int chosen = search.select_action(nd);
    REQUIRE(nd.acts[chosen].key.sender_id == 101);  // less-visited group
}

TEST_CASE("c = 0 selects the pure exploitation argmax") {
    auto net = tiny_net(6);
    auto pc = tiny_plan(1, true);
    pc.c_uct = 0.0;
    Mcts search(&net, pc);
    Mcts::Node nd;
    for (int i = 0; i < 4; ++i) {
        Mcts::ActionStat a;
        a.key = {50 + i, 7, 0};
        a.prior = 0.1 * i;
        nd.acts.push_back(a);
    }
    REQUIRE(search.select_action(nd) == 3);
}

TEST_CASE("perfect model is pure: states equal direct env replay") {
    auto st = make_task_episode(TaskId::Silhouette, 1, 77, 10);
    PerfectModel model(st, 5);
    ObsGraph g = build_graph(st.scene, st.inventory, Connectivity::Full);
    int e = g.action_edges[0];
    ActionKey key{g.body_ids[g.edges[e].first], g.body_ids[g.edges[e].second], 3};

    auto out1 = model.apply(model.root(), key);
    auto out2 = model.apply(model.root(), key);
    REQUIRE(scene_hash(model.state(out1.state).scene) ==
            scene_hash(model.state(out2.state).scene));
    REQUIRE(out1.reward == out2.reward);

    EpisodeState direct = st;
    DiscRel act{key.sender_id, key.receiver_id, col_offset_index(key.col),
                col_sticky(key.col) ? 1 : -1};
    auto res = env_step(direct, decode_disc_rel(direct, g, act, 5));
    REQUIRE(res.reward == out1.reward);
    REQUIRE(scene_hash(direct.scene) == scene_hash(model.state(out1.state).scene));
}

TEST_CASE("budget 0 is action-identical to the greedy Q policy") {
    auto net = tiny_net(8);
    MctsPolicy planner(&net, tiny_plan(0, true));
    GreedyQPolicy greedy(&net, 2);
    Rng rng(9);
    for (int i = 0; i < 40; ++i) {
        auto st = make_task_episode(TaskId::Silhouette, 1 + static_cast<int>(rng.uniform_int(3)),
                                    rng.next_u64(), 10);
        ObsGraph g = build_graph(st.scene, st.inventory, Connectivity::Full);
        Rng r1(1), r2(1);
        auto a = planner.act(st, g, r1);
        auto b = greedy.act(st, g, r2);
        REQUIRE(a.has_value());
        REQUIRE(b.has_value());
        REQUIRE(to_json(*a).dump() == to_json(*b).dump());
    }
}

TEST_CASE("search finds the single rewarding action on a one-step task") {
    // One floor target, one step allowed: only a matching-size placement on
    // the target cell scores.
    Scene s = make_empty_scene();
    Body t;
    t.id = s.next_id();
    t.kind = BodyKind::TargetBlock;
    t.rect = {1.4, 0.35, 0.7, 0.7};
    s.bodies.push_back(t);
    add_available_slots(s);
    auto st = make_episode(std::move(s), TaskId::Silhouette, /*max_steps=*/1);

    // Exhaustive oracle: enumerate all actions, step each, record winners.
    ObsGraph g = build_graph(st.scene, st.inventory, Connectivity::Full);
    auto actions = enumerate_disc_rel(g, 5);
    std::set<std::string> winners;
    for (const auto& a : actions) {
        EpisodeState copy = st;
        auto res = env_step(copy, decode_action(copy, g, a, 5));
        if (res.reward >= 1.0) winners.insert(to_json(a).dump());
    }
    REQUIRE_FALSE(winners.empty());

    PlanConfig pc = tiny_plan(static_cast<int>(actions.size()) * 4, false);
    pc.full_expansion = true;
    Mcts search(nullptr, pc);
    PerfectModel model(st, 5);
    Rng rng(10);
    ActionKey key = search.plan(model, rng);
    DiscRel chosen{key.sender_id, key.receiver_id, col_offset_index(key.col),
                   col_sticky(key.col) ? 1 : -1};
    REQUIRE(winners.count(to_json(Action{chosen}).dump()) == 1);
}

TEST_CASE("visit conservation at the root") {
    auto net = tiny_net(11);
    auto pc = tiny_plan(25, true);
    Mcts search(&net, pc);
    auto st = make_task_episode(TaskId::Connecting, 1, 5, 10);
    PerfectModel model(st, 5);
    Rng rng(12);
    search.plan(model, rng);
    const auto& root = search.nodes().front();
    int visits = root.total_visits();
    int expanded = static_cast<int>(root.acts.size());
    REQUIRE(visits == expanded + 25);  // one backup per iteration
    int sum = 0;
    for (const auto& a : root.acts) sum += a.visits();
    REQUIRE(sum == visits);
}

TEST_CASE("planning is pure given equal seeds") {
    auto net = tiny_net(13);
    auto st = make_task_episode(TaskId::Connecting, 2, 6, 10);
    auto run = [&]() {
        PerfectModel model(st, 5);
        Mcts search(&net, tiny_plan(15, true));
        Rng rng(14);
        return search.plan(model, rng);
    };
    ActionKey a = run();
    ActionKey b = run();
    REQUIRE(a == b);
}

TEST_CASE("plan trace records one backup per iteration") {
    auto net = tiny_net(15);
    auto st = make_task_episode(TaskId::Silhouette, 1, 8, 10);
    PerfectModel model(st, 5);
    Mcts search(&net, tiny_plan(10, true));
    Rng rng(16);
    search.plan(model, rng);
    REQUIRE(search.trace().size() == 10);
    for (const auto& te : search.trace()) REQUIRE_FALSE(te.path.empty());
}
