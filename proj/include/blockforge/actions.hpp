#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "blockforge/obsgraph.hpp"

namespace blockforge {

inline constexpr double kEpsX = 0.04;  // lateral slack for relative placement
inline constexpr double kEpsY = 0.04;  // vertical slack for relative placement

// Continuous components live in [-1, 1] and scale to world units on decode;
// sticky iff s > 0.
struct ContAbs {
    double X, x, y, s;
};
struct ContRel {
    double X, x, y, dx, s;
};
struct DiscAbs {
    int u, i, j;  // slot, row from bottom, column from left
    int s;        // -1 or +1
};
struct DiscRel {
    int sender_id, receiver_id;  // graph edge as body ids
    int i;                       // offset-grid index
    int s;                       // -1 or +1
};
using Action = std::variant<ContAbs, ContRel, DiscAbs, DiscRel>;

// Q-matrix column for a discrete-relative (offset, sticky) pair.
inline int action_col(int offset_index, bool sticky) { return 2 * offset_index + (sticky ? 1 : 0); }
inline int col_offset_index(int col) { return col / 2; }
inline bool col_sticky(int col) { return (col % 2) != 0; }

struct OffsetGrid {
    int n = 0;
    double w_r = 0.0, w_c = 0.0;
    std::vector<double> values;
};

// n evenly spaced offsets spanning +/- (w_r+w_c)/2 * (1 + 1/(n-3)); built so
// values[k] == -values[n-1-k] bit-exactly.
inline OffsetGrid offset_grid(int n, double w_r, double w_c) {
    if (n < 4) throw std::invalid_argument("offset_grid: n must be >= 4");
    OffsetGrid g{n, w_r, w_c, {}};
    double radius = 0.5 * (w_r + w_c) * (1.0 + 1.0 / (n - 3));
    g.values.resize(n);
    for (int k = 0; k < n; ++k)
        g.values[k] = radius * ((2.0 * k - (n - 1)) / (n - 1));
    return g;
}

namespace detail {

inline double world_x(double unit) { return unit * 0.5 * kWorldW; }
inline double world_y(double unit) { return (unit + 1.0) * 0.5 * kWorldH; }

inline const Body* snap_available(const Scene& scene, const Inventory& inv, double x_world) {
    const Body* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& b : scene.bodies) {
        if (b.kind != BodyKind::AvailableBlock || !slot_alive(scene, inv, b.id)) continue;
        double d = std::abs(b.rect.cx - x_world);
        if (d < best_d) {  // ties keep the lowest id (scan order)
            best_d = d;
            best = &b;
        }
    }
    return best;
}

// Reference candidates for relative placement: placed blocks, targets and
// the floor. Obstacles are never references.
inline const Body* snap_reference(const Scene& scene, double x_world, double y_world) {
    const Body* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& b : scene.bodies) {
        bool ok = b.kind == BodyKind::PlacedBlock || b.kind == BodyKind::TargetBlock ||
                  b.kind == BodyKind::TargetPoint || b.kind == BodyKind::Floor;
        if (!ok) continue;
        double d = std::hypot(b.rect.cx - x_world, b.rect.cy - y_world);
        if (d < best_d) {
            best_d = d;
            best = &b;
        }
    }
    return best;
}

// Vertical rule: overlap a target reference, rest just above a solid one.
inline double relative_y(const Body& ref, double h_c) {
    if (ref.kind == BodyKind::TargetBlock || ref.kind == BodyKind::TargetPoint)
        return ref.rect.cy + kEpsY;
    return ref.rect.cy + 0.5 * (ref.rect.h + h_c) + kEpsY;
}

}  // namespace detail

inline SpawnRequest decode_cont_abs(const EpisodeState& st, const ContAbs& a) {
    const Body* c = detail::snap_available(st.scene, st.inventory, detail::world_x(a.X));
    if (!c) return {.wrong_edge = true};
    return {c->rect, detail::world_x(a.x), detail::world_y(a.y), a.s > 0.0, false};
}

inline SpawnRequest decode_cont_rel(const EpisodeState& st, const ContRel& a) {
    const Body* c = detail::snap_available(st.scene, st.inventory, detail::world_x(a.X));
    const Body* r =
        detail::snap_reference(st.scene, detail::world_x(a.x), detail::world_y(a.y));
    if (!c || !r) return {.wrong_edge = true};
    double xp = r->rect.cx + a.dx * (0.5 * (r->rect.w + c->rect.w) + kEpsX);
    return {c->rect, xp, detail::relative_y(*r, c->rect.h), a.s > 0.0, false};
}

inline SpawnRequest decode_disc_abs(const EpisodeState& st, const DiscAbs& a, int grid_rows,
                                    int grid_cols) {
    if (a.i < 0 || a.i >= grid_rows || a.j < 0 || a.j >= grid_cols)
        throw std::invalid_argument("decode_disc_abs: grid index out of range");
    const auto& sizes = available_slot_sizes();
    if (a.u < 0 || a.u >= static_cast<int>(sizes.size()))
        throw std::invalid_argument("decode_disc_abs: slot index out of range");
    // Slot bodies appear in slot order among available blocks.
    int seen = 0;
    const Body* slot = nullptr;
    for (const auto& b : st.scene.bodies) {
        if (b.kind != BodyKind::AvailableBlock) continue;
        if (seen == a.u) {
            slot = &b;
            break;
        }
        seen += 1;
    }
    if (!slot || !slot_alive(st.scene, st.inventory, slot->id)) return {.wrong_edge = true};
    double cw = kWorldW / grid_cols, ch = kWorldH / grid_rows;
    double x = -0.5 * kWorldW + (a.j + 0.5) * cw;
    double y = (a.i + 0.5) * ch;
    return {slot->rect, x, y, a.s > 0, false};
}

inline SpawnRequest decode_disc_rel(const EpisodeState& st, const ObsGraph& g, const DiscRel& a,
                                    int n_offsets) {
    if (a.i < 0 || a.i >= n_offsets)
        throw std::invalid_argument("decode_disc_rel: offset index out of range");
    int s_node = g.node_of(a.sender_id);
    int r_node = g.node_of(a.receiver_id);
    int edge = (s_node >= 0 && r_node >= 0) ? g.find_edge(s_node, r_node) : -1;
    bool is_action = false;
    for (int e : g.action_edges) is_action |= (e == edge);
    if (edge < 0 || !is_action) return {.wrong_edge = true};

    const Body* u = st.scene.find(a.sender_id);
    const Body* v = st.scene.find(a.receiver_id);
    auto grid = offset_grid(n_offsets, v->rect.w, u->rect.w);
    double xp = v->rect.cx + grid.values[a.i];
    return {u->rect, xp, detail::relative_y(*v, u->rect.h), a.s > 0, false};
}

inline SpawnRequest decode_action(const EpisodeState& st, const ObsGraph& g, const Action& a,
                                  int n_offsets = 15, int grid_rows = 8, int grid_cols = 64) {
    if (auto* ca = std::get_if<ContAbs>(&a)) return decode_cont_abs(st, *ca);
    if (auto* cr = std::get_if<ContRel>(&a)) return decode_cont_rel(st, *cr);
    if (auto* da = std::get_if<DiscAbs>(&a)) return decode_disc_abs(st, *da, grid_rows, grid_cols);
    return decode_disc_rel(st, g, std::get<DiscRel>(a), n_offsets);
}

// Every (action edge x offset x sticky) triple, edge-major then offset then
// sticky; index order matches the Q-matrix layout.
inline std::vector<Action> enumerate_disc_rel(const ObsGraph& g, int n_offsets) {
    std::vector<Action> out;
    for (int e : g.action_edges) {
        int sid = g.body_ids[g.edges[e].first];
        int rid = g.body_ids[g.edges[e].second];
        for (int i = 0; i < n_offsets; ++i)
            for (int s : {-1, 1}) out.push_back(DiscRel{sid, rid, i, s});
    }
    return out;
}

inline nlohmann::json to_json(const Action& a) {
    if (auto* v = std::get_if<ContAbs>(&a))
        return {{"type", "cont_abs"}, {"X", v->X}, {"x", v->x}, {"y", v->y}, {"s", v->s}};
    if (auto* v = std::get_if<ContRel>(&a))
        return {{"type", "cont_rel"}, {"X", v->X}, {"x", v->x}, {"y", v->y},
                {"dx", v->dx},        {"s", v->s}};
    if (auto* v = std::get_if<DiscAbs>(&a))
        return {{"type", "disc_abs"}, {"u", v->u}, {"i", v->i}, {"j", v->j}, {"s", v->s}};
    const auto& v = std::get<DiscRel>(a);
    return {{"type", "disc_rel"}, {"sender", v.sender_id}, {"receiver", v.receiver_id},
            {"i", v.i},           {"s", v.s}};
}

inline Action action_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "cont_abs")
        return ContAbs{j.at("X").get<double>(), j.at("x").get<double>(), j.at("y").get<double>(),
                       j.at("s").get<double>()};
    if (type == "cont_rel")
        return ContRel{j.at("X").get<double>(), j.at("x").get<double>(), j.at("y").get<double>(),
                       j.at("dx").get<double>(), j.at("s").get<double>()};
    if (type == "disc_abs")
        return DiscAbs{j.at("u").get<int>(), j.at("i").get<int>(), j.at("j").get<int>(),
                       j.at("s").get<int>()};
    if (type == "disc_rel")
        return DiscRel{j.at("sender").get<int>(), j.at("receiver").get<int>(),
                       j.at("i").get<int>(), j.at("s").get<int>()};
    throw std::invalid_argument("unknown action type: " + type);
}

}  // namespace blockforge
