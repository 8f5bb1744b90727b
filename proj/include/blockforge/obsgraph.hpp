#pragma once

#include <algorithm>
#include <array>
#include <set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blockforge/env.hpp"

namespace blockforge {

enum class Connectivity { Sparse, Full };

inline constexpr int kFeatDim = 15;

// Feature layout: x, y, cos, sin, w, h, vx, vy, vtheta, sticky,
// one-hot(available, placed, target, obstacle), pad flag.
using BlockFeature = std::array<double, kFeatDim>;

enum class NodeKind { Available, Placed, Target, Obstacle, FloorProxy };

struct ObsGraph {
    std::vector<BlockFeature> nodes;
    std::vector<int> body_ids;  // node -> body id; the floor proxy carries the floor id
    std::vector<NodeKind> kinds;
    std::vector<std::pair<int, int>> edges;  // (sender, receiver) node indices
    std::vector<int> action_edges;           // indices into edges
    std::vector<double> globals = {0.0};

    int node_of(int body_id) const {
        for (size_t i = 0; i < body_ids.size(); ++i)
            if (body_ids[i] == static_cast<int>(body_id)) return static_cast<int>(i);
        return -1;
    }
    int find_edge(int sender, int receiver) const {
        for (size_t e = 0; e < edges.size(); ++e)
            if (edges[e].first == sender && edges[e].second == receiver)
                return static_cast<int>(e);
        return -1;
    }
};

namespace detail {

inline BlockFeature body_feature(const Body& b, bool normalize) {
    double s = normalize ? 1.0 / (0.5 * kWorldW) : 1.0;
    BlockFeature f{};
    f[0] = b.rect.cx * s;
    f[1] = b.rect.cy * s;
    f[2] = 1.0;  // cos(theta): no rotation in this world
    f[3] = 0.0;
    f[4] = b.rect.w * s;
    f[5] = b.rect.h * s;
    f[9] = b.sticky ? 1.0 : 0.0;
    switch (b.kind) {
        case BodyKind::AvailableBlock: f[10] = 1.0; break;
        case BodyKind::PlacedBlock: f[11] = 1.0; break;
        case BodyKind::TargetBlock:
        case BodyKind::TargetPoint: f[12] = 1.0; break;
        case BodyKind::Obstacle: f[13] = 1.0; break;
        case BodyKind::Floor: f[11] = 1.0; break;  // the proxy reads as a solid
    }
    return f;
}

inline NodeKind node_kind(BodyKind k) {
    switch (k) {
        case BodyKind::AvailableBlock: return NodeKind::Available;
        case BodyKind::PlacedBlock: return NodeKind::Placed;
        case BodyKind::TargetBlock:
        case BodyKind::TargetPoint: return NodeKind::Target;
        case BodyKind::Obstacle: return NodeKind::Obstacle;
        case BodyKind::Floor: return NodeKind::FloorProxy;
    }
    return NodeKind::Placed;
}

}  // namespace detail

// One feature vector per body in scene order, floor excluded, exhausted
// inventory slots dropped.
inline std::vector<BlockFeature> encode_features(const Scene& scene, const Inventory& inv,
                                                 bool normalize = true) {
    std::vector<BlockFeature> out;
    for (const auto& b : scene.bodies) {
        if (b.kind == BodyKind::Floor) continue;
        if (b.kind == BodyKind::AvailableBlock && !slot_alive(scene, inv, b.id)) continue;
        out.push_back(detail::body_feature(b, normalize));
    }
    return out;
}

// Builds the observation graph. The floor is appended as a proxy node so
// first placements always have a reference object.
inline ObsGraph build_graph(const Scene& scene, const Inventory& inv,
                            Connectivity connectivity, bool normalize = true) {
    ObsGraph g;
    for (const auto& b : scene.bodies) {
        if (b.kind == BodyKind::Floor) continue;
        if (b.kind == BodyKind::AvailableBlock && !slot_alive(scene, inv, b.id)) continue;
        g.nodes.push_back(detail::body_feature(b, normalize));
        g.body_ids.push_back(b.id);
        g.kinds.push_back(detail::node_kind(b.kind));
    }
    const Body* floor = scene.find(scene.floor_id());
    g.nodes.push_back(detail::body_feature(*floor, normalize));
    g.body_ids.push_back(floor->id);
    g.kinds.push_back(NodeKind::FloorProxy);

    int n = static_cast<int>(g.nodes.size());
    std::set<std::pair<int, int>> pairs;
    if (connectivity == Connectivity::Full) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) pairs.insert({i, j});
    } else {
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                NodeKind a = g.kinds[i], b = g.kinds[j];
                bool avail = a == NodeKind::Available || b == NodeKind::Available;
                auto annot_pair = [](NodeKind x, NodeKind y) {
                    return (x == NodeKind::Target || x == NodeKind::Obstacle) &&
                           (y == NodeKind::Placed || y == NodeKind::FloorProxy);
                };
                bool annot = annot_pair(a, b) || annot_pair(b, a);
                if (avail || annot) pairs.insert({i, j});
            }
        }
        for (const auto& [ida, idb] : contact_pairs(scene)) {
            int i = g.node_of(ida), j = g.node_of(idb);
            if (i >= 0 && j >= 0) pairs.insert({std::min(i, j), std::max(i, j)});
        }
    }
    for (const auto& [i, j] : pairs) {
        g.edges.push_back({i, j});
        g.edges.push_back({j, i});
    }
    std::sort(g.edges.begin(), g.edges.end());

    for (size_t e = 0; e < g.edges.size(); ++e) {
        NodeKind s = g.kinds[g.edges[e].first];
        NodeKind r = g.kinds[g.edges[e].second];
        bool ref_ok = r == NodeKind::Placed || r == NodeKind::Target || r == NodeKind::FloorProxy;
        if (s == NodeKind::Available && ref_ok) g.action_edges.push_back(static_cast<int>(e));
    }
    return g;
}

inline nlohmann::json to_json(const ObsGraph& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& f : g.nodes) nodes.push_back(std::vector<double>(f.begin(), f.end()));
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [s, r] : g.edges)
        edges.push_back(nlohmann::json::array({s, r, nlohmann::json::array({0.0})}));
    return nlohmann::json{{"nodes", nodes}, {"edges", edges}, {"globals", g.globals}};
}

}  // namespace blockforge
