#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blockforge/geometry.hpp"
#include "blockforge/hash.hpp"

namespace blockforge {

inline constexpr double kWorldW = 16.0;
inline constexpr double kWorldH = 16.0;
inline constexpr double kBlockH = 0.7;
inline constexpr std::array<double, 3> kBlockWidths = {0.7, 2.1, 3.5};
inline constexpr double kEpsContact = 1e-3;  // touching tolerance, meters
inline constexpr double kEpsGeom = 1e-9;     // overlap tolerance, square meters

// Size class index into kBlockWidths, or -1 for non-standard widths.
inline int size_class(double w) {
    for (int i = 0; i < 3; ++i)
        if (std::abs(w - kBlockWidths[i]) < 1e-9) return i;
    return -1;
}

enum class BodyKind {
    AvailableBlock,
    PlacedBlock,
    Obstacle,
    TargetBlock,
    TargetPoint,
    Floor,
};

inline const char* to_string(BodyKind k) {
    switch (k) {
        case BodyKind::AvailableBlock: return "available_block";
        case BodyKind::PlacedBlock: return "placed_block";
        case BodyKind::Obstacle: return "obstacle";
        case BodyKind::TargetBlock: return "target_block";
        case BodyKind::TargetPoint: return "target_point";
        case BodyKind::Floor: return "floor";
    }
    return "?";
}

inline BodyKind body_kind_from_string(const std::string& s) {
    if (s == "available_block") return BodyKind::AvailableBlock;
    if (s == "placed_block") return BodyKind::PlacedBlock;
    if (s == "obstacle") return BodyKind::Obstacle;
    if (s == "target_block") return BodyKind::TargetBlock;
    if (s == "target_point") return BodyKind::TargetPoint;
    if (s == "floor") return BodyKind::Floor;
    throw std::invalid_argument("unknown body kind: " + s);
}

// Collidable bodies participate in overlap/contact/settling.
inline bool collidable(BodyKind k) {
    return k == BodyKind::PlacedBlock || k == BodyKind::Obstacle || k == BodyKind::Floor;
}

struct Body {
    int id = 0;
    Rect rect;
    BodyKind kind = BodyKind::PlacedBlock;
    bool sticky = false;
};

// Plain value; the whole world state. Bodies keep placement order.
struct Scene {
    double world_w = kWorldW;
    double world_h = kWorldH;
    std::vector<Body> bodies;
    std::set<std::pair<int, int>> bonds;  // normalized (lo, hi) id pairs

    const Body* find(int id) const {
        for (const auto& b : bodies)
            if (b.id == id) return &b;
        return nullptr;
    }
    Body* find(int id) {
        for (auto& b : bodies)
            if (b.id == id) return &b;
        return nullptr;
    }

    int next_id() const {
        int m = -1;
        for (const auto& b : bodies) m = std::max(m, b.id);
        return m + 1;
    }

    int floor_id() const {
        for (const auto& b : bodies)
            if (b.kind == BodyKind::Floor) return b.id;
        return -1;
    }

    void add_bond(int a, int b) { bonds.insert({std::min(a, b), std::max(a, b)}); }
    bool bonded(int a, int b) const { return bonds.count({std::min(a, b), std::max(a, b)}) > 0; }
};

// World spans x in [-8, 8]; the floor surface is y = 0. The floor body sits
// below it so the standard relative-placement formula works against it.
inline Scene make_empty_scene() {
    Scene s;
    Body floor;
    floor.id = 0;
    floor.kind = BodyKind::Floor;
    floor.rect = {0.0, -0.5 * kBlockH, kWorldW, kBlockH};
    s.bodies.push_back(floor);
    return s;
}

inline nlohmann::json to_json(const Body& b) {
    return nlohmann::json{{"id", b.id},       {"kind", to_string(b.kind)},
                          {"cx", b.rect.cx},  {"cy", b.rect.cy},
                          {"w", b.rect.w},    {"h", b.rect.h},
                          {"sticky", b.sticky}};
}

inline Body body_from_json(const nlohmann::json& j) {
    Body b;
    b.id = j.at("id").get<int>();
    b.kind = body_kind_from_string(j.at("kind").get<std::string>());
    b.rect = {j.at("cx").get<double>(), j.at("cy").get<double>(),
              j.at("w").get<double>(), j.at("h").get<double>()};
    b.sticky = j.at("sticky").get<bool>();
    return b;
}

inline nlohmann::json to_json(const Scene& s) {
    nlohmann::json bodies = nlohmann::json::array();
    for (const auto& b : s.bodies) bodies.push_back(to_json(b));
    nlohmann::json bonds = nlohmann::json::array();
    for (const auto& [a, b] : s.bonds) bonds.push_back(nlohmann::json::array({a, b}));
    return nlohmann::json{{"world", {{"w", s.world_w}, {"h", s.world_h}}},
                          {"bodies", bodies},
                          {"bonds", bonds}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
    Scene s;
    s.world_w = j.at("world").at("w").get<double>();
    s.world_h = j.at("world").at("h").get<double>();
    for (const auto& bj : j.at("bodies")) s.bodies.push_back(body_from_json(bj));
    for (const auto& pj : j.at("bonds")) s.add_bond(pj.at(0).get<int>(), pj.at(1).get<int>());
    return s;
}

// Content hash of the canonical serialization; used for replay verification.
inline std::uint64_t scene_hash(const Scene& s) { return fnv1a64(to_json(s).dump()); }

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace blockforge
