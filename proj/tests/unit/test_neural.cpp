#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>

#include "blockforge/nn/adam.hpp"
#include "blockforge/nn/gradcheck.hpp"
#include "blockforge/nn/net.hpp"

using namespace blockforge;
using namespace blockforge::nn;

namespace {

ObsGraph random_graph(Rng& rng, int n_placed) {
    Scene s = make_empty_scene();
    Body t;
    t.id = s.next_id();
    t.kind = BodyKind::TargetBlock;
    t.rect = {rng.uniform(-3, 3), 0.35, 0.7, 0.7};
    s.bodies.push_back(t);
    add_available_slots(s);
    for (int i = 0; i < n_placed; ++i)
        spawn(s, Rect{0, 0, kBlockWidths[rng.uniform_int(0, 2)], 0.7}, rng.uniform(-6, 6),
              rng.uniform(0.35, 4.0), rng.uniform() < 0.3);
    settle(s);
    auto st = make_episode(std::move(s), TaskId::Silhouette);
    return build_graph(st.scene, st.inventory, Connectivity::Full);
}

GNConfig small_cfg() {
    GNConfig cfg;
    cfg.latent = 6;
    cfg.hidden = 64;  // hidden width stays fixed at 64 everywhere
    cfg.n_offsets = 15;
    return cfg;
}

}  // namespace

TEST_CASE("forward shapes: E x (2 * n_offsets), stable across n_rec") {
    Rng rng(5);
    auto g = random_graph(rng, 2);
    auto net = GNParams::init(small_cfg(), Rng(1));
    for (int n_rec : {1, 3, 5}) {
        Mat q = gn_forward(net, g, n_rec);
        REQUIRE(q.rows == static_cast<int>(g.edges.size()));
        REQUIRE(q.cols == 30);
    }
}

TEST_CASE("zero weights give zero outputs") {
    Rng rng(6);
    auto g = random_graph(rng, 1);
    auto net = GNParams::init(small_cfg(), Rng(2));
    for (auto& m : net.p.t)
        for (auto& x : m.a) x = 0.0;
    Mat q = gn_forward(net, g, 3);
    for (double x : q.a) REQUIRE(x == 0.0);
}

TEST_CASE("single node, no edges: forward is total") {
    ObsGraph g;
    g.nodes.push_back(BlockFeature{});
    g.body_ids.push_back(0);
    g.kinds.push_back(NodeKind::FloorProxy);
    auto net = GNParams::init(small_cfg(), Rng(3));
    Mat q = gn_forward(net, g, 3);
    REQUIRE(q.rows == 0);
    REQUIRE(q.cols == 30);
}

TEST_CASE("permutation equivariance of edge Q values") {
    Rng rng(7);
    auto g = random_graph(rng, 2);
    auto net = GNParams::init(small_cfg(), Rng(4));
    Mat q = gn_forward(net, g, 3);

    // Reverse the node order, re-index edges, and align rows by edge identity.
    int n = static_cast<int>(g.nodes.size());
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = n - 1 - i;
    ObsGraph pg;
    pg.nodes.resize(n);
    pg.body_ids.resize(n);
    pg.kinds.resize(n);
    for (int i = 0; i < n; ++i) {
        pg.nodes[perm[i]] = g.nodes[i];
        pg.body_ids[perm[i]] = g.body_ids[i];
        pg.kinds[perm[i]] = g.kinds[i];
    }
    for (const auto& [s, r] : g.edges) pg.edges.push_back({perm[s], perm[r]});
    Mat pq = gn_forward(net, pg, 3);

    for (size_t e = 0; e < g.edges.size(); ++e) {
        int ps = perm[g.edges[e].first], pr = perm[g.edges[e].second];
        int pe = -1;
        for (size_t k = 0; k < pg.edges.size(); ++k)
            if (pg.edges[k].first == ps && pg.edges[k].second == pr) pe = static_cast<int>(k);
        REQUIRE(pe >= 0);
        for (int c = 0; c < q.cols; ++c)
            REQUIRE(q(static_cast<int>(e), c) == Catch::Approx(pq(pe, c)).margin(1e-9));
    }
}

TEST_CASE("tape: linear layer gradient equals the input outer product") {
    // y = x W, loss = sum(y * u)  =>  dW = x^T u, dx = u W^T
    Tape t;
    Mat x(2, 3), w(3, 2), u(2, 2);
    Rng rng(8);
    for (auto* m : {&x, &w, &u})
        for (auto& v : m->a) v = rng.uniform(-1, 1);
    auto xr = t.leaf(x, true);
    auto wr = t.leaf(w, true);
    auto y = t.matmul(xr, wr);
    auto loss = t.sum_all(t.mul(y, t.leaf(u)));
    t.backward(loss);

    Mat dw_expect(3, 2);
    matmul_tA_acc(x, u, dw_expect);
    for (size_t i = 0; i < dw_expect.size(); ++i)
        REQUIRE(t.grad(wr).a[i] == Catch::Approx(dw_expect.a[i]).margin(1e-12));
    Mat dx_expect(2, 3);
    matmul_tB_acc(u, w, dx_expect);
    for (size_t i = 0; i < dx_expect.size(); ++i)
        REQUIRE(t.grad(xr).a[i] == Catch::Approx(dx_expect.a[i]).margin(1e-12));
}

TEST_CASE("zero loss weight gives zero gradients") {
    Rng rng(9);
    auto g = random_graph(rng, 1);
    auto net = GNParams::init(small_cfg(), Rng(5));
    auto [spec, in] = single_graph(g);
    Tape t;
    auto fw = gn_forward_tape(t, net, spec, in, 3, true);
    auto zero = t.leaf(Mat(t.val(fw.q_edges).rows, t.val(fw.q_edges).cols));
    auto loss = t.sum_all(t.mul(fw.q_edges, zero));
    t.backward(loss);
    for (auto ref : fw.param_refs)
        for (double x : t.grad(ref).a) REQUIRE(x == 0.0);
}

TEST_CASE("gradients match central finite differences") {
    Rng rng(10);
    for (int n_rec : {1, 3}) {
        auto g = random_graph(rng, 1);
        auto net = GNParams::init(small_cfg(), rng.split(n_rec));
        auto [spec, in] = single_graph(g);
        auto rep = grad_check(net, spec, in, n_rec, rng.split(100 + n_rec), 1e-5, 2);
        INFO("n_rec=" << n_rec << " max_rel_err=" << rep.max_rel_err
                      << " checked=" << rep.checked << " skipped=" << rep.skipped);
        REQUIRE(rep.pass(1e-4));
    }
}

TEST_CASE("grad check is a real oracle: corrupted gradients fail") {
    Rng rng(11);
    auto g = random_graph(rng, 0);
    auto net = GNParams::init(small_cfg(), Rng(6));
    auto [spec, in] = single_graph(g);

    Mat q0 = gn_forward(net, spec, in, 1);
    Mat w(q0.rows, q0.cols);
    Rng wr(12);
    for (auto& x : w.a) x = wr.uniform(-1, 1);

    Tape t;
    auto fw = gn_forward_tape(t, net, spec, in, 1, true);
    auto loss = t.sum_all(t.mul(fw.q_edges, t.leaf(w)));
    t.backward(loss);

    // FD for one q-head output weight (guaranteed nonzero fan-in).
    int ti = net.qhead.w2;
    size_t k = 0;
    double h = 1e-5;
    GNParams probe = net;
    auto readout = [&]() {
        Mat qq = gn_forward(probe, spec, in, 1);
        double v = 0;
        for (size_t i = 0; i < qq.size(); ++i) v += qq.a[i] * w.a[i];
        return v;
    };
    probe.p.t[ti].a[k] += h;
    double up = readout();
    probe.p.t[ti].a[k] -= 2 * h;
    double dn = readout();
    double fd = (up - dn) / (2 * h);
    double ga = t.grad(fw.param_refs[ti]).a[k];
    double rel_ok = std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1e-5});
    REQUIRE(rel_ok < 1e-4);
    double corrupted = ga + 0.05;
    double rel_bad =
        std::abs(corrupted - fd) / std::max({std::abs(corrupted), std::abs(fd), 1e-5});
    REQUIRE(rel_bad > 1e-4);
}

TEST_CASE("adam: zero grads leave params unchanged, default lr is 1e-4") {
    auto net = GNParams::init(small_cfg(), Rng(7));
    AdamState opt;
    REQUIRE(opt.lr == 1e-4);
    opt.init_like(net.p);
    std::vector<Mat> zeros;
    for (const auto& m : net.p.t) zeros.emplace_back(m.rows, m.cols);
    auto before = net.p.t;
    opt.step(net.p, zeros);
    for (size_t i = 0; i < before.size(); ++i)
        for (size_t k = 0; k < before[i].size(); ++k)
            REQUIRE(net.p.t[i].a[k] == before[i].a[k]);
}

TEST_CASE("adam: converges on a scalar quadratic") {
    Params p;
    p.add("x", Mat(1, 1));
    AdamState opt;
    opt.lr = 0.05;
    opt.init_like(p);
    for (int i = 0; i < 2000; ++i) {
        std::vector<Mat> g{Mat(1, 1)};
        g[0](0, 0) = 2.0 * (p.t[0](0, 0) - 3.0);
        opt.step(p, g);
    }
    REQUIRE(p.t[0](0, 0) == Catch::Approx(3.0).margin(1e-3));
}

TEST_CASE("checkpoint round trip is bit exact") {
    auto net = GNParams::init(small_cfg(), Rng(8));
    std::string bin = "/tmp/bf_test_params.bin", man = "/tmp/bf_test_params.json";
    save_params(net.p, bin, man);
    auto net2 = GNParams::init(small_cfg(), Rng(999));
    load_params(net2.p, bin, man);
    for (size_t i = 0; i < net.p.t.size(); ++i)
        for (size_t k = 0; k < net.p.t[i].size(); ++k)
            REQUIRE(net2.p.t[i].a[k] == net.p.t[i].a[k]);
    std::remove(bin.c_str());
    std::remove(man.c_str());
}

TEST_CASE("global head decodes from globals when enabled") {
    GNConfig cfg = small_cfg();
    cfg.global_head = true;
    cfg.global_actions = 7 * 2 * 3 * 2;
    auto net = GNParams::init(cfg, Rng(9));
    Rng rng(13);
    auto g = random_graph(rng, 1);
    auto [spec, in] = single_graph(g);
    Tape t;
    auto fw = gn_forward_tape(t, net, spec, in, 2, false);
    REQUIRE(t.val(fw.q_global).rows == 1);
    REQUIRE(t.val(fw.q_global).cols == cfg.global_actions);
}

TEST_CASE("forward is total over random scene graphs") {
    Rng rng(14);
    auto net = GNParams::init(small_cfg(), Rng(10));
    for (int i = 0; i < 10; ++i) {
        auto g = random_graph(rng, static_cast<int>(rng.uniform_int(0, 5)));
        Mat q = gn_forward(net, g, 3);
        REQUIRE(q.rows == static_cast<int>(g.edges.size()));
        for (double x : q.a) REQUIRE(std::isfinite(x));
    }
}

TEST_CASE("batched forward equals per-graph forward") {
    Rng rng(15);
    auto net = GNParams::init(small_cfg(), Rng(11));
    auto g1 = random_graph(rng, 1);
    auto g2 = random_graph(rng, 3);
    GraphSpec spec;
    GraphInputs in;
    in.nodes = Mat(0, kFeatDim);
    in.edges = Mat(0, 1);
    in.globs = Mat(0, 1);
    append_graph(spec, in, g1, kFeatDim);
    append_graph(spec, in, g2, kFeatDim);
    Mat batched = gn_forward(net, spec, in, 3);
    Mat q1 = gn_forward(net, g1, 3);
    Mat q2 = gn_forward(net, g2, 3);
    REQUIRE(batched.rows == q1.rows + q2.rows);
    for (int i = 0; i < q1.rows; ++i)
        for (int c = 0; c < q1.cols; ++c)
            REQUIRE(batched(i, c) == Catch::Approx(q1(i, c)).margin(1e-12));
    for (int i = 0; i < q2.rows; ++i)
        for (int c = 0; c < q2.cols; ++c)
            REQUIRE(batched(q1.rows + i, c) == Catch::Approx(q2(i, c)).margin(1e-12));
}
