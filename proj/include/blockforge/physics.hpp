#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "blockforge/geometry.hpp"
#include "blockforge/scene.hpp"

namespace blockforge {

enum class SpawnStatus { Ok, BadSpawn, ObstacleOverlap };

struct SpawnResult {
    SpawnStatus status = SpawnStatus::BadSpawn;
    int id = -1;  // new body id on Ok
};

// Creates a not-yet-settled block centered at (x, y). Obstacle overlap wins
// over block overlap (it is episode-fatal).
inline SpawnResult spawn(Scene& scene, const Rect& proto, double x, double y, bool sticky) {
    Rect r{x, y, proto.w, proto.h};
    for (const auto& b : scene.bodies)
        if (b.kind == BodyKind::Obstacle && overlap_area(r, b.rect) > kEpsGeom)
            return {SpawnStatus::ObstacleOverlap, -1};
    if (r.left() < -0.5 * scene.world_w - kEpsGeom || r.right() > 0.5 * scene.world_w + kEpsGeom ||
        r.bottom() < -kEpsGeom || r.top() > scene.world_h + kEpsGeom)
        return {SpawnStatus::BadSpawn, -1};
    for (const auto& b : scene.bodies)
        if ((b.kind == BodyKind::PlacedBlock || b.kind == BodyKind::Floor) &&
            overlap_area(r, b.rect) > kEpsGeom)
            return {SpawnStatus::BadSpawn, -1};
    Body nb;
    nb.id = scene.next_id();
    nb.rect = r;
    nb.kind = BodyKind::PlacedBlock;
    nb.sticky = sticky;
    scene.bodies.push_back(nb);
    return {SpawnStatus::Ok, nb.id};
}

enum class SettleStatus { Settled, ObstacleHit, Unsettled };

struct SettleOutcome {
    SettleStatus status = SettleStatus::Settled;
    std::vector<int> moved_ids;
    std::set<std::pair<int, int>> contacts;
};

inline std::set<std::pair<int, int>> contact_pairs(const Scene& scene) {
    std::set<std::pair<int, int>> out;
    const auto& bs = scene.bodies;
    for (size_t i = 0; i < bs.size(); ++i) {
        if (!collidable(bs[i].kind)) continue;
        for (size_t j = i + 1; j < bs.size(); ++j) {
            if (!collidable(bs[j].kind)) continue;
            if (rect_distance(bs[i].rect, bs[j].rect) <= kEpsContact)
                out.insert({std::min(bs[i].id, bs[j].id), std::max(bs[i].id, bs[j].id)});
        }
    }
    return out;
}

struct Assembly {
    std::vector<int> ids;   // placed-block ids, ascending
    bool grounded = false;  // bonded (transitively) to the floor
};

namespace detail {

class UnionFind {
public:
    explicit UnionFind(int n) : parent_(n) {
        for (int i = 0; i < n; ++i) parent_[i] = i;
    }
    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(int a, int b) { parent_[find(a)] = find(b); }

private:
    std::vector<int> parent_;
};

}  // namespace detail

// Partition of placed blocks into bond-connected assemblies.
inline std::vector<Assembly> assemblies(const Scene& scene) {
    std::vector<int> placed;  // indices into bodies
    std::map<int, int> slot;  // body id -> dense slot
    for (size_t i = 0; i < scene.bodies.size(); ++i)
        if (scene.bodies[i].kind == BodyKind::PlacedBlock) {
            slot[scene.bodies[i].id] = static_cast<int>(placed.size());
            placed.push_back(static_cast<int>(i));
        }
    int n = static_cast<int>(placed.size());
    detail::UnionFind uf(n + 1);  // extra slot for the floor
    const int floor_slot = n;
    int fid = scene.floor_id();
    for (const auto& [a, b] : scene.bonds) {
        int sa = (a == fid) ? floor_slot : (slot.count(a) ? slot.at(a) : -1);
        int sb = (b == fid) ? floor_slot : (slot.count(b) ? slot.at(b) : -1);
        if (sa >= 0 && sb >= 0) uf.unite(sa, sb);
    }
    std::map<int, Assembly> groups;
    for (int s = 0; s < n; ++s) {
        int root = uf.find(s);
        groups[root].ids.push_back(scene.bodies[placed[s]].id);
    }
    int floor_root = uf.find(floor_slot);
    std::vector<Assembly> out;
    for (auto& [root, g] : groups) {
        g.grounded = (root == floor_root);
        std::sort(g.ids.begin(), g.ids.end());
        out.push_back(std::move(g));
    }
    std::sort(out.begin(), out.end(),
              [](const Assembly& a, const Assembly& b) { return a.ids.front() < b.ids.front(); });
    return out;
}

namespace detail {

inline bool obstacle_contact(const Scene& scene) {
    for (const auto& a : scene.bodies) {
        if (a.kind != BodyKind::PlacedBlock) continue;
        for (const auto& o : scene.bodies)
            if (o.kind == BodyKind::Obstacle && rect_distance(a.rect, o.rect) <= kEpsContact)
                return true;
    }
    return false;
}

struct AsmView {
    std::vector<int> idx;  // indices into scene.bodies
    bool grounded = false;
};

inline std::vector<AsmView> assembly_views(const Scene& scene) {
    auto parts = assemblies(scene);
    std::vector<AsmView> views;
    for (auto& p : parts) {
        AsmView v;
        v.grounded = p.grounded;
        for (int id : p.ids)
            for (size_t i = 0; i < scene.bodies.size(); ++i)
                if (scene.bodies[i].id == id) v.idx.push_back(static_cast<int>(i));
        views.push_back(std::move(v));
    }
    // Resolve bottom-up so stacked structures fall in order.
    std::sort(views.begin(), views.end(), [&](const AsmView& a, const AsmView& b) {
        double ba = std::numeric_limits<double>::infinity();
        double bb = ba;
        for (int i : a.idx) ba = std::min(ba, scene.bodies[i].rect.bottom());
        for (int i : b.idx) bb = std::min(bb, scene.bodies[i].rect.bottom());
        if (ba != bb) return ba < bb;
        return scene.bodies[a.idx.front()].id < scene.bodies[b.idx.front()].id;
    });
    return views;
}

inline bool in_asm(const AsmView& v, int body_index) {
    return std::find(v.idx.begin(), v.idx.end(), body_index) != v.idx.end();
}

// A block may rest on the floor (an infinite half-plane y <= 0 for settling
// purposes) or on placed blocks outside its assembly.
inline bool supported(const Scene& scene, const AsmView& v) {
    if (v.grounded) return true;
    for (int i : v.idx) {
        const Rect& r = scene.bodies[i].rect;
        if (std::abs(r.bottom()) <= kEpsContact) return true;
        for (size_t j = 0; j < scene.bodies.size(); ++j) {
            if (in_asm(v, static_cast<int>(j))) continue;
            const Body& s = scene.bodies[j];
            if (s.kind != BodyKind::PlacedBlock) continue;
            if (std::abs(r.bottom() - s.rect.top()) <= kEpsContact &&
                interval_overlap(r.left(), r.right(), s.rect.left(), s.rect.right()) > 0.0)
                return true;
        }
    }
    return false;
}

// Distance the assembly can fall before its lowest obstruction. Landing on
// an obstacle is allowed here; the fatal contact check happens after moving.
inline double drop_distance(const Scene& scene, const AsmView& v) {
    double d = std::numeric_limits<double>::infinity();
    for (int i : v.idx) {
        const Rect& r = scene.bodies[i].rect;
        double gap = r.bottom();  // floor half-plane
        for (size_t j = 0; j < scene.bodies.size(); ++j) {
            if (in_asm(v, static_cast<int>(j))) continue;
            const Body& s = scene.bodies[j];
            if (s.kind != BodyKind::PlacedBlock && s.kind != BodyKind::Obstacle) continue;
            if (interval_overlap(r.left(), r.right(), s.rect.left(), s.rect.right()) <= 0.0)
                continue;
            if (s.rect.top() <= r.bottom() + kEpsGeom)
                gap = std::min(gap, r.bottom() - s.rect.top());
        }
        d = std::min(d, gap);
    }
    return std::max(0.0, d);
}

struct Contact {
    double lo = 0.0, hi = 0.0;  // x-extent of the contact patch
    bool floor = false;
    int support_idx = -1;  // index into scene.bodies, -1 for floor
};

inline std::vector<Contact> support_contacts(const Scene& scene, const AsmView& v) {
    std::vector<Contact> out;
    for (int i : v.idx) {
        const Rect& r = scene.bodies[i].rect;
        if (std::abs(r.bottom()) <= kEpsContact)
            out.push_back({r.left(), r.right(), true, -1});
        for (size_t j = 0; j < scene.bodies.size(); ++j) {
            if (in_asm(v, static_cast<int>(j))) continue;
            const Body& s = scene.bodies[j];
            if (s.kind != BodyKind::PlacedBlock) continue;
            if (std::abs(r.bottom() - s.rect.top()) > kEpsContact) continue;
            double lo = std::max(r.left(), s.rect.left());
            double hi = std::min(r.right(), s.rect.right());
            if (hi - lo > 0.0) out.push_back({lo, hi, false, static_cast<int>(j)});
        }
    }
    return out;
}

inline double com_x(const Scene& scene, const AsmView& v) {
    double m = 0.0, mx = 0.0;  // mass proportional to area, uniform density
    for (int i : v.idx) {
        const Rect& r = scene.bodies[i].rect;
        m += r.area();
        mx += r.area() * r.cx;
    }
    return mx / m;
}

inline void translate(Scene& scene, const AsmView& v, double dx, double dy, std::set<int>& moved) {
    for (int i : v.idx) {
        scene.bodies[i].rect.cx += dx;
        scene.bodies[i].rect.cy += dy;
        moved.insert(scene.bodies[i].id);
    }
}

// Bonds form on contact whenever either side is sticky. Only placed blocks
// and the floor participate.
inline bool form_bonds(Scene& scene) {
    bool added = false;
    int fid = scene.floor_id();
    for (const auto& a : scene.bodies) {
        if (a.kind != BodyKind::PlacedBlock) continue;
        if (a.sticky && std::abs(a.rect.bottom()) <= kEpsContact && !scene.bonded(a.id, fid)) {
            scene.add_bond(a.id, fid);
            added = true;
        }
        for (const auto& b : scene.bodies) {
            if (b.kind != BodyKind::PlacedBlock || b.id <= a.id) continue;
            if (!a.sticky && !b.sticky) continue;
            if (rect_distance(a.rect, b.rect) > kEpsContact) continue;
            if (!scene.bonded(a.id, b.id)) {
                scene.add_bond(a.id, b.id);
                added = true;
            }
        }
    }
    return added;
}

// Minimal slide magnitude >= want (direction dir) leaving no lateral overlap
// with placed blocks outside the assembly.
inline double extend_slide(const Scene& scene, const AsmView& v, int dir, double want) {
    std::vector<std::pair<double, double>> forbidden;  // intervals of slide magnitude
    for (int i : v.idx) {
        const Rect& r = scene.bodies[i].rect;
        for (size_t j = 0; j < scene.bodies.size(); ++j) {
            if (in_asm(v, static_cast<int>(j))) continue;
            const Body& s = scene.bodies[j];
            if (s.kind != BodyKind::PlacedBlock) continue;
            if (interval_overlap(r.bottom(), r.top(), s.rect.bottom(), s.rect.top()) <= kEpsGeom)
                continue;
            double lo, hi;
            if (dir > 0) {
                lo = s.rect.left() - r.right();
                hi = s.rect.right() - r.left();
            } else {
                lo = r.left() - s.rect.right();
                hi = r.right() - s.rect.left();
            }
            if (hi > 0.0) forbidden.push_back({std::max(0.0, lo), hi});
        }
    }
    std::sort(forbidden.begin(), forbidden.end());
    double d = want;
    for (const auto& [lo, hi] : forbidden)
        if (d > lo - kEpsContact && d < hi + kEpsContact) d = hi + kEpsContact;
    return d;
}

// True if sliding the assembly horizontally by (dir * d) sweeps an obstacle.
inline bool slide_hits_obstacle(const Scene& scene, const AsmView& v, int dir, double d) {
    for (int i : v.idx) {
        const Rect& r = scene.bodies[i].rect;
        Rect swept = r;
        swept.w = r.w + d;
        swept.cx = r.cx + 0.5 * dir * d;
        for (const auto& o : scene.bodies)
            if (o.kind == BodyKind::Obstacle && rect_distance(swept, o.rect) <= kEpsContact)
                return true;
    }
    return false;
}

}  // namespace detail

// Quasi-static resolution: assemblies fall straight down to the highest
// support under their footprint; an assembly whose COM x leaves its
// support-contact extent slides sideways past the offending support and
// resumes falling. Iterates to a fixpoint or the iteration cap.
inline SettleOutcome settle(Scene& scene, int max_iters = 1000) {
    using namespace detail;
    SettleOutcome out;
    std::set<int> moved;
    auto finish = [&](SettleStatus st) {
        out.status = st;
        out.moved_ids.assign(moved.begin(), moved.end());
        out.contacts = contact_pairs(scene);
        return out;
    };

    if (obstacle_contact(scene)) return finish(SettleStatus::ObstacleHit);

    for (int iter = 0; iter < max_iters; ++iter) {
        // Bonds form on contact, before any stability ruling, so a glued
        // overhang merges with its support instead of sliding off it.
        form_bonds(scene);
        auto views = assembly_views(scene);

        // Falls first, bottom-up, one movement per pass.
        bool changed = false;
        for (auto& v : views) {
            if (v.grounded || supported(scene, v)) continue;
            double d = drop_distance(scene, v);
            translate(scene, v, 0.0, -d, moved);
            if (obstacle_contact(scene)) return finish(SettleStatus::ObstacleHit);
            changed = true;
            break;
        }
        if (changed) continue;

        // All supported: enforce the COM rule.
        for (auto& v : views) {
            if (v.grounded) continue;
            auto contacts = support_contacts(scene, v);
            if (contacts.empty()) continue;  // transient; next pass falls
            double lo = contacts.front().lo, hi = contacts.front().hi;
            for (const auto& c : contacts) {
                lo = std::min(lo, c.lo);
                hi = std::max(hi, c.hi);
            }
            double com = com_x(scene, v);
            if (com >= lo && com <= hi) continue;
            // The floor cannot be vacated by sliding: the footprint travels
            // with the assembly, so the imbalance is permanent.
            bool any_floor = false;
            for (const auto& c : contacts) any_floor |= c.floor;
            if (any_floor) return finish(SettleStatus::Unsettled);

            int dir = com > hi ? 1 : -1;
            // Offending support: the contact bounding the extent on the
            // overhang side. Slide until every block clears that body.
            const Contact* off = &contacts.front();
            for (const auto& c : contacts) {
                if (dir > 0 ? (c.hi > off->hi) : (c.lo < off->lo)) off = &c;
            }
            const Rect& sup = scene.bodies[off->support_idx].rect;
            double want = 0.0;
            for (int i : v.idx) {
                const Rect& r = scene.bodies[i].rect;
                if (std::abs(r.bottom() - sup.top()) > kEpsContact) continue;
                if (interval_overlap(r.left(), r.right(), sup.left(), sup.right()) <= 0.0)
                    continue;
                want = std::max(want, dir > 0 ? sup.right() - r.left() : r.right() - sup.left());
            }
            want += kEpsContact;
            double d = extend_slide(scene, v, dir, want);
            if (slide_hits_obstacle(scene, v, dir, d)) return finish(SettleStatus::ObstacleHit);
            translate(scene, v, dir * d, 0.0, moved);
            changed = true;
            break;
        }
        if (changed) continue;

        return finish(SettleStatus::Settled);
    }
    return finish(SettleStatus::Unsettled);
}

// Potential-energy proxy: sum of area * center height over movable blocks.
inline double potential_energy(const Scene& scene) {
    double e = 0.0;
    for (const auto& b : scene.bodies)
        if (b.kind == BodyKind::PlacedBlock) e += b.rect.area() * b.rect.cy;
    return e;
}

}  // namespace blockforge
