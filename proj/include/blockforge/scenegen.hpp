#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockforge/physics.hpp"
#include "blockforge/rng.hpp"
#include "blockforge/scene.hpp"

namespace blockforge {

enum class TaskId { Silhouette, Connecting, Covering, CoveringHard };

inline const char* to_string(TaskId t) {
    switch (t) {
        case TaskId::Silhouette: return "silhouette";
        case TaskId::Connecting: return "connecting";
        case TaskId::Covering: return "covering";
        case TaskId::CoveringHard: return "covering_hard";
    }
    return "?";
}

inline TaskId task_from_string(const std::string& s) {
    if (s == "silhouette") return TaskId::Silhouette;
    if (s == "connecting") return TaskId::Connecting;
    if (s == "covering") return TaskId::Covering;
    if (s == "covering_hard" || s == "covering-hard") return TaskId::CoveringHard;
    throw std::invalid_argument("unknown task: " + s);
}

inline int max_level(TaskId t) {
    switch (t) {
        case TaskId::Silhouette: return 8;
        case TaskId::Connecting: return 4;
        case TaskId::Covering: return 3;
        case TaskId::CoveringHard: return 2;
    }
    return 1;
}

struct LevelSpec {
    TaskId task = TaskId::Silhouette;
    int level = 1;

    LevelSpec() = default;
    LevelSpec(TaskId t, int l) : task(t), level(l) {
        if (l < 1 || l > max_level(t)) throw std::invalid_argument("level out of range");
    }
};

struct GenConfig {
    std::uint64_t rng_seed = 0;
    bool hardest_only = false;
};

// The 7 block prototypes below the floor: three small, three medium, one
// large. Slot order is fixed; discrete-absolute u indexes it.
inline const std::vector<int>& available_slot_sizes() {
    static const std::vector<int> sizes = {0, 0, 0, 1, 1, 1, 2};
    return sizes;
}

inline void add_available_slots(Scene& scene) {
    double cursor = -7.6;
    for (int sc : available_slot_sizes()) {
        double w = kBlockWidths[sc];
        Body b;
        b.id = scene.next_id();
        b.kind = BodyKind::AvailableBlock;
        b.rect = {cursor + 0.5 * w, -1.2, w, kBlockH};
        scene.bodies.push_back(b);
        cursor += w + 0.4;
    }
}

// ---------------------------------------------------------------------------
// Tessellation: rows of flush-stacked cells (row k spans y in
// [0.7k, 0.7(k+1)]) tiled left to right with 0.35 horizontal separation.

struct Cell {
    int row = 0;
    double cx = 0.0;
    double w = 0.7;

    double cy() const { return 0.5 * kBlockH + kBlockH * row; }
    double left() const { return cx - 0.5 * w; }
    double right() const { return cx + 0.5 * w; }
    Rect rect() const { return {cx, cy(), w, kBlockH}; }
};

inline constexpr double kCellSeparation = 0.35;
inline constexpr int kTessellationRows = 6;

inline bool cells_x_overlap(const Cell& a, const Cell& b) {
    return interval_overlap(a.left(), a.right(), b.left(), b.right()) > 0.0;
}

inline std::vector<Cell> tessellate(Rng& rng, int rows = kTessellationRows) {
    std::vector<Cell> cells;
    for (int row = 0; row < rows; ++row) {
        double cursor = -8.0 + rng.uniform(0.0, 1.05);
        while (true) {
            // Small cells kept likeliest: they stagger chains and keep the
            // per-row cell count high.
            double u = rng.uniform();
            int sc = u < 0.45 ? 0 : (u < 0.8 ? 1 : 2);
            double w = kBlockWidths[sc];
            if (cursor + w > 8.0 - 0.2) break;
            cells.push_back({row, cursor + 0.5 * w, w});
            cursor += w + kCellSeparation;
        }
    }
    return cells;
}

// ---------------------------------------------------------------------------

namespace genutil {

// Weighted index choice; weights need not be normalized.
inline int weighted_choice(Rng& rng, const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double r = rng.uniform() * total;
    for (size_t i = 0; i < w.size(); ++i) {
        r -= w[i];
        if (r <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(w.size()) - 1;
}

// Place k widths inside [lo, hi] with at least min_gap between neighbors,
// distributing the slack by a Dirichlet draw. Always succeeds when the
// widths fit, so sampled widths are never biased by rejection.
inline std::vector<double> spread_positions(Rng& rng, const std::vector<double>& widths,
                                            double lo, double hi, double min_gap) {
    int k = static_cast<int>(widths.size());
    double need = 0.0;
    for (double w : widths) need += w;
    need += min_gap * (k - 1);
    double slack = (hi - lo) - need;
    if (slack < 0.0) throw std::runtime_error("spread_positions: widths do not fit");
    std::vector<double> e(k + 1);
    double esum = 0.0;
    for (auto& x : e) {
        x = -std::log(1.0 - rng.uniform());
        esum += x;
    }
    std::vector<double> centers;
    double cursor = lo;
    for (int i = 0; i < k; ++i) {
        cursor += slack * e[i] / esum;
        centers.push_back(cursor + 0.5 * widths[i]);
        cursor += widths[i] + min_gap;
    }
    return centers;
}

}  // namespace genutil

struct GenStats {
    int n_targets = 0;
    int n_obstacles = 0;
    double obstacle_top_length = 0.0;
};

inline GenStats scene_stats(const Scene& s) {
    GenStats g;
    for (const auto& b : s.bodies) {
        if (b.kind == BodyKind::TargetBlock || b.kind == BodyKind::TargetPoint) g.n_targets++;
        if (b.kind == BodyKind::Obstacle) {
            g.n_obstacles++;
            g.obstacle_top_length += b.rect.w;
        }
    }
    return g;
}

// Silhouette: `level` targets chained up from the floor on tessellation
// cells, plus up to min(6, level-1) obstacles on free cells kept clear of
// the rows directly above and below any target.
inline Scene gen_silhouette(const LevelSpec& spec, std::uint64_t seed) {
    if (spec.task != TaskId::Silhouette) throw std::invalid_argument("task mismatch");
    Rng base = Rng(seed).split("silhouette");
    int n_targets = spec.level;
    int max_row = std::min(kTessellationRows, (spec.level * kTessellationRows + 7) / 8);
    int max_obstacles = std::min(6, spec.level - 1);

    for (int attempt = 0; attempt < 64; ++attempt) {
        Rng rng = base.split(attempt);
        auto cells = tessellate(rng);
        std::vector<int> targets, obstacles;
        auto taken = [&](int ci) {
            for (int t : targets)
                if (t == ci) return true;
            for (int o : obstacles)
                if (o == ci) return true;
            return false;
        };

        bool dead_end = false;
        for (int t = 0; t < n_targets && !dead_end; ++t) {
            std::vector<int> cand;
            std::vector<double> weight;
            for (size_t ci = 0; ci < cells.size(); ++ci) {
                const Cell& c = cells[ci];
                if (c.row >= max_row || taken(static_cast<int>(ci))) continue;
                bool supported_cell = (c.row == 0);
                for (int ti : targets)
                    if (cells[ti].row == c.row - 1 && cells_x_overlap(c, cells[ti]))
                        supported_cell = true;
                if (!supported_cell) continue;
                cand.push_back(static_cast<int>(ci));
                weight.push_back(1.0 + c.row);
            }
            if (cand.empty()) {
                dead_end = true;
                break;
            }
            targets.push_back(cand[genutil::weighted_choice(rng, weight)]);
        }
        if (dead_end) continue;

        int n_obs = max_obstacles > 0 ? rng.uniform_int(0, max_obstacles) : 0;
        for (int o = 0; o < n_obs; ++o) {
            std::vector<int> cand;
            std::vector<double> weight;
            for (size_t ci = 0; ci < cells.size(); ++ci) {
                const Cell& c = cells[ci];
                if (c.row >= max_row || taken(static_cast<int>(ci))) continue;
                bool clear = true;
                for (int ti : targets) {
                    const Cell& t = cells[ti];
                    if (std::abs(t.row - c.row) <= 1 && cells_x_overlap(c, t)) clear = false;
                }
                if (!clear) continue;
                cand.push_back(static_cast<int>(ci));
                weight.push_back(1.0 + c.row);
            }
            if (cand.empty()) break;  // fewer obstacles is fine
            obstacles.push_back(cand[genutil::weighted_choice(rng, weight)]);
        }

        Scene scene = make_empty_scene();
        for (int ti : targets) {
            Body b;
            b.id = scene.next_id();
            b.kind = BodyKind::TargetBlock;
            b.rect = cells[ti].rect();
            scene.bodies.push_back(b);
        }
        for (int oi : obstacles) {
            Body b;
            b.id = scene.next_id();
            b.kind = BodyKind::Obstacle;
            b.rect = cells[oi].rect();
            scene.bodies.push_back(b);
        }
        add_available_slots(scene);
        return scene;
    }
    throw std::runtime_error("gen_silhouette: no valid scene after bounded retries");
}

inline constexpr double kObstacleH = 0.2;
inline constexpr double kObstacleGap = 0.5;
inline constexpr double kLayerPitch = 2.1;      // Connecting / Covering
inline constexpr double kLayerPitchHard = 1.4;  // CoveringHard
inline constexpr double kFirstLayerBottom = 1.05;

namespace genutil {

inline void add_obstacle_layers(Scene& scene, Rng& rng, int layers, int max_per_layer,
                                double width_lo, double width_hi, double pitch,
                                double field_lo, double field_hi) {
    for (int layer = 0; layer < layers; ++layer) {
        int count = rng.uniform_int(1, max_per_layer);
        std::vector<double> widths(count);
        for (auto& w : widths) w = rng.uniform(width_lo, width_hi);
        auto centers = spread_positions(rng, widths, field_lo, field_hi, kObstacleGap);
        double bottom = kFirstLayerBottom + pitch * layer;
        for (int i = 0; i < count; ++i) {
            Body b;
            b.id = scene.next_id();
            b.kind = BodyKind::Obstacle;
            b.rect = {centers[i], bottom + 0.5 * kObstacleH, widths[i], kObstacleH};
            scene.bodies.push_back(b);
        }
    }
}

}  // namespace genutil

// Connecting: level-1 obstacle layers (level 1 has none), three target
// points one block-height band above the highest layer.
inline Scene gen_connecting(const LevelSpec& spec, std::uint64_t seed) {
    if (spec.task != TaskId::Connecting) throw std::invalid_argument("task mismatch");
    Rng rng = Rng(seed).split("connecting");
    int layers = spec.level - 1;

    Scene scene = make_empty_scene();
    double target_y = kFirstLayerBottom + kLayerPitch * layers + 0.5 * kBlockH;
    std::vector<double> widths(3, 0.2);
    auto centers = genutil::spread_positions(rng, widths, -6.0, 6.0, 1.5);
    for (double cx : centers) {
        Body b;
        b.id = scene.next_id();
        b.kind = BodyKind::TargetPoint;
        b.rect = {cx, target_y, 0.2, 0.2};
        scene.bodies.push_back(b);
    }
    genutil::add_obstacle_layers(scene, rng, layers, 3, 0.7, 2.8, kLayerPitch, -7.0, 7.0);
    add_available_slots(scene);
    return scene;
}

// Covering: `level` obstacle layers of 1-2 obstacles. CoveringHard: same
// but wider obstacles, tighter vertical pitch, at most two layers.
inline Scene gen_covering(const LevelSpec& spec, std::uint64_t seed, bool hard) {
    if (spec.task != (hard ? TaskId::CoveringHard : TaskId::Covering))
        throw std::invalid_argument("task mismatch");
    Rng rng = Rng(seed).split(hard ? "covering_hard" : "covering");
    int layers = spec.level;
    double width_hi = hard ? 3.5 : 2.8;
    double pitch = hard ? kLayerPitchHard : kLayerPitch;

    Scene scene = make_empty_scene();
    genutil::add_obstacle_layers(scene, rng, layers, 2, 0.7, width_hi, pitch, -6.5, 6.5);
    add_available_slots(scene);
    return scene;
}

inline Scene generate_scene(const LevelSpec& spec, std::uint64_t seed) {
    switch (spec.task) {
        case TaskId::Silhouette: return gen_silhouette(spec, seed);
        case TaskId::Connecting: return gen_connecting(spec, seed);
        case TaskId::Covering: return gen_covering(spec, seed, false);
        case TaskId::CoveringHard: return gen_covering(spec, seed, true);
    }
    throw std::logic_error("unreachable");
}

// Curriculum position -> level. Levels up to ceil(progress * max) are live;
// the draw is uniform over them. hardest_only pins the top level.
inline int sample_level(double progress, TaskId task, Rng& rng, bool hardest_only = false) {
    int top = max_level(task);
    if (hardest_only) return top;
    int cur = std::clamp(static_cast<int>(std::ceil(progress * top)), 1, top);
    return rng.uniform_int(1, cur);
}

inline nlohmann::json scene_sidecar(TaskId task, int level, std::uint64_t seed, const Scene& s) {
    auto st = scene_stats(s);
    return nlohmann::json{{"task", to_string(task)},
                          {"level", level},
                          {"seed", seed},
                          {"stats",
                           {{"n_targets", st.n_targets},
                            {"n_obstacles", st.n_obstacles},
                            {"obstacle_top_length", st.obstacle_top_length}}}};
}

}  // namespace blockforge
