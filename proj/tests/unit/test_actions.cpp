#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "blockforge/actions.hpp"

using namespace blockforge;

namespace {

EpisodeState episode_with_reference() {
    // One placed medium block to act as a reference, plus a target.
    Scene s = make_empty_scene();
    Body t;
    t.id = s.next_id();
    t.kind = BodyKind::TargetBlock;
    t.rect = {-3.0, 0.35, 0.7, 0.7};
    s.bodies.push_back(t);
    add_available_slots(s);
    spawn(s, Rect{0, 0, 3.5, 0.7}, 1.0, 0.35, false);
    settle(s);
    return make_episode(std::move(s), TaskId::Silhouette);
}

}  // namespace

TEST_CASE("offset_grid: formula endpoints, symmetry, validation") {
    auto g = offset_grid(15, 2.1, 0.7);
    REQUIRE(static_cast<int>(g.values.size()) == 15);
    double radius = 0.5 * (2.1 + 0.7) * (1.0 + 1.0 / 12.0);
    REQUIRE(g.values.front() == Catch::Approx(-radius).margin(1e-12));
    REQUIRE(g.values.back() == Catch::Approx(radius).margin(1e-12));
    REQUIRE(g.values.back() == Catch::Approx(1.4 * 13.0 / 12.0).margin(1e-12));
    REQUIRE(g.values[7] == 0.0);
    for (int k = 0; k < 15; ++k) REQUIRE(g.values[k] == -g.values[14 - k]);  // bit exact

    REQUIRE_THROWS_AS(offset_grid(3, 1.0, 1.0), std::invalid_argument);
    auto g4 = offset_grid(4, 1.0, 1.0);
    REQUIRE(static_cast<int>(g4.values.size()) == 4);
    REQUIRE(g4.values.back() == Catch::Approx(1.0 * 2.0).margin(1e-12));
}

TEST_CASE("continuous relative: closed-form placement") {
    // Reference medium-wide: x_r = 1.0, w_r = 3.5; choose the small proto.
    auto st = episode_with_reference();
    // X near the small slots picks a small block (w_c = 0.7).
    ContRel a{-0.9, 1.0 / 8.0, (0.35 / 8.0) - 1.0 + 0.25, 0.5, -0.1};
    // aim (x, y) exactly at the reference center so snapping is unambiguous
    a.x = 1.0 / 8.0;
    a.y = 0.35 / 8.0 - 1.0 + 1.0;  // unit y such that world y = 0.35... see below
    // world y mapping: y_w = (a.y + 1) * 8 -> want 0.35 => a.y = 0.35/8 - 1
    a.y = 0.35 / 8.0 - 1.0;
    auto req = decode_cont_rel(st, a);
    REQUIRE_FALSE(req.wrong_edge);
    REQUIRE(req.proto.w == Catch::Approx(0.7));
    REQUIRE(req.x == Catch::Approx(1.0 + 0.5 * (0.5 * (3.5 + 0.7) + 0.04)).margin(1e-12));
    REQUIRE(req.x == Catch::Approx(1.0 + 0.5 * 2.14).margin(1e-12));
    // solid reference y rule: y_r + (h_r + h_c)/2 + eps_y = 0.35 + 0.7 + 0.04
    REQUIRE(req.y == Catch::Approx(1.09).margin(1e-12));
    REQUIRE_FALSE(req.sticky);  // s = -0.1 is non-positive

    ContRel b = a;
    b.dx = 0.0;
    b.s = 0.3;
    auto req2 = decode_cont_rel(st, b);
    REQUIRE(req2.x == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(req2.sticky);
}

TEST_CASE("continuous relative: target reference overlaps vertically") {
    auto st = episode_with_reference();
    ContRel a{-0.9, -3.0 / 8.0, 0.35 / 8.0 - 1.0, 0.0, -1.0};
    auto req = decode_cont_rel(st, a);
    REQUIRE(req.x == Catch::Approx(-3.0).margin(1e-12));
    REQUIRE(req.y == Catch::Approx(0.35 + 0.04).margin(1e-12));
}

TEST_CASE("continuous absolute: snapping and stickiness sign") {
    auto st = episode_with_reference();
    // X exactly at the large slot's x picks it.
    double large_x = 0.0;
    for (const auto& b : st.scene.bodies)
        if (b.kind == BodyKind::AvailableBlock && size_class(b.rect.w) == 2)
            large_x = b.rect.cx;
    ContAbs a{large_x / 8.0, 0.25, -0.5, 0.0};
    auto req = decode_cont_abs(st, a);
    REQUIRE(req.proto.w == Catch::Approx(3.5));
    REQUIRE(req.x == Catch::Approx(2.0));
    REQUIRE(req.y == Catch::Approx(4.0));
    REQUIRE_FALSE(req.sticky);  // s = 0 is not positive

    // Midway between two identical small slots: the lower id wins.
    double x1 = 0, x2 = 0;
    int seen = 0;
    for (const auto& b : st.scene.bodies) {
        if (b.kind != BodyKind::AvailableBlock || size_class(b.rect.w) != 0) continue;
        if (seen == 0) x1 = b.rect.cx;
        if (seen == 1) x2 = b.rect.cx;
        seen++;
    }
    ContAbs mid{0.5 * (x1 + x2) / 8.0, 0.0, -0.5, 1.0};
    auto reqm = decode_cont_abs(st, mid);
    REQUIRE(reqm.proto.w == Catch::Approx(0.7));
    REQUIRE(reqm.sticky);
}

TEST_CASE("discrete absolute: grid geometry") {
    auto st = episode_with_reference();
    // 8x64 grid: cell width = 16/64 = 0.25
    auto req = decode_disc_abs(st, DiscAbs{0, 0, 0, -1}, 8, 64);
    REQUIRE(req.x == Catch::Approx(-8.0 + 0.125));
    REQUIRE(req.y == Catch::Approx(1.0));  // cell height 2, centered

    auto req2 = decode_disc_abs(st, DiscAbs{6, 2, 33, 1}, 8, 64);
    REQUIRE(req2.proto.w == Catch::Approx(3.5));  // slot 6 is the large block
    REQUIRE(req2.x == Catch::Approx(-8.0 + 33.5 * 0.25));
    REQUIRE(req2.sticky);

    // 256x256 grid has 65536 cells per block choice.
    REQUIRE(256 * 256 == 65536);
    auto req3 = decode_disc_abs(st, DiscAbs{0, 255, 255, -1}, 256, 256);
    REQUIRE(req3.x == Catch::Approx(8.0 - 0.5 * (16.0 / 256)));
    REQUIRE_THROWS_AS(decode_disc_abs(st, DiscAbs{0, 8, 0, -1}, 8, 64), std::invalid_argument);
    REQUIRE_THROWS_AS(decode_disc_abs(st, DiscAbs{7, 0, 0, -1}, 8, 64), std::invalid_argument);
}

TEST_CASE("discrete relative: placement, wrong edges, cross-consistency") {
    auto st = episode_with_reference();
    auto g = build_graph(st.scene, st.inventory, Connectivity::Full);

    int placed_id = -1, small_slot = -1;
    for (const auto& b : st.scene.bodies) {
        if (b.kind == BodyKind::PlacedBlock) placed_id = b.id;
        if (b.kind == BodyKind::AvailableBlock && size_class(b.rect.w) == 0 && small_slot < 0)
            small_slot = b.id;
    }

    // Middle offset: centered on the reference, just above it.
    auto req = decode_disc_rel(st, g, DiscRel{small_slot, placed_id, 7, -1}, 15);
    REQUIRE_FALSE(req.wrong_edge);
    REQUIRE(req.x == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(req.y == Catch::Approx(1.09).margin(1e-12));

    // Cross-parameterization: middle offset equals cont-rel with dx = 0.
    ContRel cr{-0.9, 1.0 / 8.0, 0.35 / 8.0 - 1.0, 0.0, -1.0};
    auto creq = decode_cont_rel(st, cr);
    REQUIRE(creq.x == req.x);
    REQUIRE(creq.y == req.y);

    // Endpoint offset overhangs the reference by half a width plus slack.
    auto grid = offset_grid(15, 3.5, 0.7);
    auto reqe = decode_disc_rel(st, g, DiscRel{small_slot, placed_id, 14, -1}, 15);
    REQUIRE(reqe.x == Catch::Approx(1.0 + grid.values[14]).margin(1e-12));
    REQUIRE(grid.values[14] > 0.5 * (3.5 + 0.7) * 0.5);

    // placed -> placed is a wrong edge; so is an unknown id.
    auto wrong = decode_disc_rel(st, g, DiscRel{placed_id, placed_id, 7, -1}, 15);
    REQUIRE(wrong.wrong_edge);
    auto wrong2 = decode_disc_rel(st, g, DiscRel{9999, placed_id, 7, -1}, 15);
    REQUIRE(wrong2.wrong_edge);
    REQUIRE_THROWS_AS(decode_disc_rel(st, g, DiscRel{small_slot, placed_id, 15, -1}, 15),
                      std::invalid_argument);
}

TEST_CASE("enumerate_disc_rel: counts and totality") {
    auto st = episode_with_reference();
    auto g = build_graph(st.scene, st.inventory, Connectivity::Full);
    auto actions = enumerate_disc_rel(g, 15);
    // action edges x 15 offsets x 2 sticky
    REQUIRE(actions.size() == g.action_edges.size() * 30);

    // Every enumerated action decodes without a wrong edge (spawn may still
    // be rejected by physics, but never by edge validity).
    for (const auto& a : actions) {
        auto req = decode_action(st, g, a, 15);
        REQUIRE_FALSE(req.wrong_edge);
    }
}

TEST_CASE("hardest-scene action counts sit within 10x of the published scale") {
    auto st = make_episode(gen_silhouette(LevelSpec(TaskId::Silhouette, 8), 17),
                           TaskId::Silhouette);
    for (int i = 0; i < 6; ++i)
        spawn(st.scene, Rect{0, 0, 0.7, 0.7}, -7 + 1.4 * i, 0.35, false);
    settle(st.scene);
    auto g = build_graph(st.scene, st.inventory, Connectivity::Full);
    auto n = enumerate_disc_rel(g, 15).size();
    REQUIRE(n > 2000);    // 2e4 / 10
    REQUIRE(n < 200000);  // 2e4 * 10
}

TEST_CASE("action json round trip") {
    std::vector<Action> acts = {ContAbs{0.1, -0.2, 0.3, 0.9}, ContRel{0.1, 0.2, 0.3, -0.4, -0.5},
                                DiscAbs{3, 1, 2, 1}, DiscRel{8, 2, 7, -1}};
    for (const auto& a : acts) {
        auto j = to_json(a);
        auto back = action_from_json(nlohmann::json::parse(j.dump()));
        REQUIRE(to_json(back).dump() == j.dump());
    }
}
