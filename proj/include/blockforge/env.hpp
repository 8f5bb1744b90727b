#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "blockforge/physics.hpp"
#include "blockforge/scenegen.hpp"

namespace blockforge {

struct Inventory {
    std::array<int, 3> counts = {0, 0, 0};  // by size class
    bool unlimited = true;

    bool has(int size_cls) const {
        return size_cls >= 0 && (unlimited || counts[size_cls] > 0);
    }
    void consume(int size_cls) {
        if (!unlimited) counts[size_cls] -= 1;
    }
    int total() const { return counts[0] + counts[1] + counts[2]; }
};

inline Inventory initial_inventory(TaskId task) {
    Inventory inv;
    if (task == TaskId::CoveringHard) {
        inv.unlimited = false;
        inv.counts = {3, 3, 1};
    }
    return inv;
}

// Slot aliveness under a finite inventory: the first `count` slots of each
// size stay visible.
inline bool slot_alive(const Scene& scene, const Inventory& inv, int body_id) {
    if (inv.unlimited) return true;
    std::array<int, 3> seen = {0, 0, 0};
    for (const auto& b : scene.bodies) {
        if (b.kind != BodyKind::AvailableBlock) continue;
        int sc = size_class(b.rect.w);
        if (b.id == body_id) return seen[sc] < inv.counts[sc];
        seen[sc] += 1;
    }
    return false;
}

enum class TerminationReason {
    Completed,
    MaxSteps,
    ObstacleHit,
    BadSpawn,
    WrongEdge,
    Unsettled,
    OutOfBlocks,
};

inline const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::Completed: return "completed";
        case TerminationReason::MaxSteps: return "max_steps";
        case TerminationReason::ObstacleHit: return "obstacle_hit";
        case TerminationReason::BadSpawn: return "bad_spawn";
        case TerminationReason::WrongEdge: return "wrong_edge";
        case TerminationReason::Unsettled: return "unsettled";
        case TerminationReason::OutOfBlocks: return "out_of_blocks";
    }
    return "?";
}

inline TerminationReason termination_from_string(const std::string& s) {
    for (auto r : {TerminationReason::Completed, TerminationReason::MaxSteps,
                   TerminationReason::ObstacleHit, TerminationReason::BadSpawn,
                   TerminationReason::WrongEdge, TerminationReason::Unsettled,
                   TerminationReason::OutOfBlocks})
        if (s == to_string(r)) return r;
    throw std::invalid_argument("unknown termination reason: " + s);
}

struct StepResult {
    double reward = 0.0;
    bool done = false;
    std::optional<TerminationReason> reason;
};

struct EpisodeState {
    Scene scene;
    Inventory inventory;
    TaskId task = TaskId::Silhouette;
    int step = 0;
    int max_steps = 40;
    double accrued_reward = 0.0;
    std::optional<TerminationReason> terminated;
};

inline EpisodeState make_episode(Scene scene, TaskId task, int max_steps = 40) {
    EpisodeState st;
    st.scene = std::move(scene);
    st.task = task;
    st.inventory = initial_inventory(task);
    st.max_steps = max_steps;
    return st;
}

// A decoded action: what to place and where. wrong_edge marks an invalid
// discrete-relative edge (or a dead inventory slot).
struct SpawnRequest {
    Rect proto{0, 0, 0.7, 0.7};
    double x = 0.0;
    double y = 0.0;
    bool sticky = false;
    bool wrong_edge = false;
};

// --- Task metrics --------------------------------------------------------

inline double sticky_penalty(TaskId task) {
    switch (task) {
        case TaskId::Silhouette: return 0.5;
        case TaskId::Connecting: return 0.0;
        case TaskId::Covering: return 2.0;
        case TaskId::CoveringHard: return 0.5;
    }
    return 0.0;
}

// Greedy one-to-one matching of placed blocks to same-size targets with an
// overlap ratio of at least 0.9, best overlaps first. Returns matched
// (block id, target id) pairs.
inline std::vector<std::pair<int, int>> silhouette_matching(const Scene& scene) {
    struct Pair {
        double ratio;
        int block_id, target_id;
    };
    std::vector<Pair> pairs;
    for (const auto& b : scene.bodies) {
        if (b.kind != BodyKind::PlacedBlock) continue;
        for (const auto& t : scene.bodies) {
            if (t.kind != BodyKind::TargetBlock) continue;
            if (size_class(b.rect.w) != size_class(t.rect.w)) continue;
            if (std::abs(b.rect.h - t.rect.h) > 1e-9) continue;
            double ratio = overlap_area(b.rect, t.rect) / t.rect.area();
            if (ratio >= 0.9) pairs.push_back({ratio, b.id, t.id});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.ratio != b.ratio) return a.ratio > b.ratio;
        if (a.block_id != b.block_id) return a.block_id < b.block_id;
        return a.target_id < b.target_id;
    });
    std::vector<int> used_b, used_t;
    std::vector<std::pair<int, int>> matched;
    for (const auto& p : pairs) {
        if (std::count(used_b.begin(), used_b.end(), p.block_id)) continue;
        if (std::count(used_t.begin(), used_t.end(), p.target_id)) continue;
        used_b.push_back(p.block_id);
        used_t.push_back(p.target_id);
        matched.push_back({p.block_id, p.target_id});
    }
    return matched;
}

inline int silhouette_matches(const Scene& scene) {
    return static_cast<int>(silhouette_matching(scene).size());
}

inline int target_count(const Scene& scene) {
    int n = 0;
    for (const auto& b : scene.bodies)
        if (b.kind == BodyKind::TargetBlock || b.kind == BodyKind::TargetPoint) n += 1;
    return n;
}

// Targets whose center lies inside or on the boundary of a placed block.
inline int connecting_touched(const Scene& scene) {
    int n = 0;
    for (const auto& t : scene.bodies) {
        if (t.kind != BodyKind::TargetPoint) continue;
        for (const auto& b : scene.bodies)
            if (b.kind == BodyKind::PlacedBlock && b.rect.contains(t.rect.cx, t.rect.cy)) {
                n += 1;
                break;
            }
    }
    return n;
}

inline double covering_total_length(const Scene& scene) {
    double total = 0.0;
    for (const auto& o : scene.bodies)
        if (o.kind == BodyKind::Obstacle) total += o.rect.w;
    return total;
}

// Measure of each obstacle's top span shadowed by placed blocks strictly
// above it; overlapping covers are not double counted.
inline double covering_covered_length(const Scene& scene) {
    double total = 0.0;
    for (const auto& o : scene.bodies) {
        if (o.kind != BodyKind::Obstacle) continue;
        std::vector<std::pair<double, double>> spans;
        for (const auto& b : scene.bodies) {
            if (b.kind != BodyKind::PlacedBlock) continue;
            if (b.rect.bottom() < o.rect.top()) continue;
            double lo = std::max(b.rect.left(), o.rect.left());
            double hi = std::min(b.rect.right(), o.rect.right());
            if (hi > lo) spans.push_back({lo, hi});
        }
        std::sort(spans.begin(), spans.end());
        double covered = 0.0, cursor = -1e18;
        for (const auto& [lo, hi] : spans) {
            double a = std::max(lo, cursor);
            if (hi > a) covered += hi - a;
            cursor = std::max(cursor, hi);
        }
        total += covered;
    }
    return total;
}

inline double task_total(const Scene& scene, TaskId task) {
    switch (task) {
        case TaskId::Silhouette: return silhouette_matches(scene);
        case TaskId::Connecting: return connecting_touched(scene);
        case TaskId::Covering:
        case TaskId::CoveringHard: return covering_covered_length(scene);
    }
    return 0.0;
}

inline bool task_complete(const Scene& scene, TaskId task) {
    switch (task) {
        case TaskId::Silhouette: {
            int n = target_count(scene);
            return n > 0 && silhouette_matches(scene) == n;
        }
        case TaskId::Connecting: {
            int n = target_count(scene);
            return n > 0 && connecting_touched(scene) == n;
        }
        case TaskId::Covering:
        case TaskId::CoveringHard: {
            double total = covering_total_length(scene);
            return total > 0.0 && covering_covered_length(scene) >= 0.99 * total;
        }
    }
    return false;
}

// One environment step: spawn, settle, reward delta, termination checks in
// order. Obstacle contact zeroes the whole episode return.
inline StepResult env_step(EpisodeState& st, const SpawnRequest& req) {
    if (st.terminated) throw std::logic_error("env_step on terminated episode");
    st.step += 1;

    auto terminal = [&](double r, TerminationReason why) {
        st.accrued_reward += r;
        st.terminated = why;
        return StepResult{r, true, why};
    };
    auto obstacle_death = [&]() {
        double r = -st.accrued_reward;
        st.accrued_reward = 0.0;
        st.terminated = TerminationReason::ObstacleHit;
        return StepResult{r, true, TerminationReason::ObstacleHit};
    };

    if (req.wrong_edge) return terminal(0.0, TerminationReason::WrongEdge);
    int sc = size_class(req.proto.w);
    if (!st.inventory.has(sc)) return terminal(0.0, TerminationReason::WrongEdge);

    double prev = task_total(st.scene, st.task);
    auto spawned = spawn(st.scene, req.proto, req.x, req.y, req.sticky);
    if (spawned.status == SpawnStatus::ObstacleOverlap) return obstacle_death();
    if (spawned.status == SpawnStatus::BadSpawn) return terminal(0.0, TerminationReason::BadSpawn);
    st.inventory.consume(sc);

    auto settled = settle(st.scene);
    if (settled.status == SettleStatus::ObstacleHit) return obstacle_death();

    double reward = task_total(st.scene, st.task) - prev;
    if (req.sticky) reward -= sticky_penalty(st.task);
    if (settled.status == SettleStatus::Unsettled)
        return terminal(reward, TerminationReason::Unsettled);

    st.accrued_reward += reward;
    if (task_complete(st.scene, st.task)) {
        st.terminated = TerminationReason::Completed;
        return {reward, true, TerminationReason::Completed};
    }
    if (!st.inventory.unlimited && st.inventory.total() == 0) {
        st.terminated = TerminationReason::OutOfBlocks;
        return {reward, true, TerminationReason::OutOfBlocks};
    }
    if (st.step >= st.max_steps) {
        st.terminated = TerminationReason::MaxSteps;
        return {reward, true, TerminationReason::MaxSteps};
    }
    return {reward, false, std::nullopt};
}

inline EpisodeState make_task_episode(TaskId task, int level, std::uint64_t seed,
                                      int max_steps = 40) {
    return make_episode(generate_scene(LevelSpec(task, level), seed), task, max_steps);
}

}  // namespace blockforge
