#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "blockforge/plan.hpp"

namespace blockforge {

// A policy maps (episode state, observation graph) to an action, or resigns
// (nullopt) when it has nothing useful left to do.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::optional<Action> act(const EpisodeState& st, const ObsGraph& g, Rng& rng) = 0;
    virtual std::string name() const = 0;
};

// Uniform over the enumerable discrete-relative actions; never a wrong edge.
class RandomValidPolicy : public Policy {
public:
    explicit RandomValidPolicy(int n_offsets = 15) : n_offsets_(n_offsets) {}

    std::optional<Action> act(const EpisodeState&, const ObsGraph& g, Rng& rng) override {
        auto actions = enumerate_disc_rel(g, n_offsets_);
        if (actions.empty()) return std::nullopt;
        return actions[rng.uniform_int(actions.size())];
    }
    std::string name() const override { return "random"; }

private:
    int n_offsets_;
};

// ---------------------------------------------------------------------------
// Silhouette heuristic: fill targets layer by layer, center outward, using
// the matching block size placed directly onto the target cell; glue only
// when the new block's COM would be unsupported by the course below and no
// block it would touch is already sticky.

namespace heur {

inline int course_of(double cy) { return static_cast<int>(std::lround(cy / kBlockH - 0.5)); }

struct SupportProbe {
    bool supported = false;
    bool touches_sticky = false;
};

inline SupportProbe probe_support(const Scene& scene, const Rect& candidate) {
    SupportProbe out;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    if (std::abs(candidate.bottom()) <= kEpsContact) {
        out.supported = true;  // floor carries anything
        return out;
    }
    for (const auto& b : scene.bodies) {
        if (b.kind != BodyKind::PlacedBlock) continue;
        bool touching = rect_distance(candidate, b.rect) <= kEpsContact;
        if (touching && b.sticky) out.touches_sticky = true;
        if (std::abs(candidate.bottom() - b.rect.top()) > kEpsContact) continue;
        double clo = std::max(candidate.left(), b.rect.left());
        double chi = std::min(candidate.right(), b.rect.right());
        if (chi - clo <= 0.0) continue;
        lo = std::min(lo, clo);
        hi = std::max(hi, chi);
    }
    out.supported = lo <= candidate.cx && candidate.cx <= hi;
    return out;
}

}  // namespace heur

class SilhouetteHeuristic : public Policy {
public:
    explicit SilhouetteHeuristic(int n_offsets = 15) : n_offsets_(n_offsets) {}

    std::optional<Action> act(const EpisodeState& st, const ObsGraph& g, Rng&) override {
        std::set<int> matched;
        for (const auto& [b, t] : silhouette_matching(st.scene)) matched.insert(t);

        const Body* next = nullptr;
        auto better = [](const Body& a, const Body& b) {
            int ra = heur::course_of(a.rect.cy), rb = heur::course_of(b.rect.cy);
            if (ra != rb) return ra < rb;
            double da = std::abs(a.rect.cx), db = std::abs(b.rect.cx);
            if (da != db) return da < db;
            return a.rect.cx < b.rect.cx;  // leftmost on distance ties
        };
        for (const auto& t : st.scene.bodies) {
            if (t.kind != BodyKind::TargetBlock || matched.count(t.id)) continue;
            if (!next || better(t, *next)) next = &t;
        }
        if (!next) return std::nullopt;

        int slot = -1;
        for (const auto& b : st.scene.bodies)
            if (b.kind == BodyKind::AvailableBlock &&
                size_class(b.rect.w) == size_class(next->rect.w) &&
                slot_alive(st.scene, st.inventory, b.id)) {
                slot = b.id;
                break;
            }
        if (slot < 0) return std::nullopt;
        if (g.node_of(next->id) < 0 || g.node_of(slot) < 0) return std::nullopt;

        auto probe = heur::probe_support(st.scene, next->rect);
        bool sticky = !probe.supported && !probe.touches_sticky;
        return DiscRel{slot, next->id, n_offsets_ / 2, sticky ? 1 : -1};
    }
    std::string name() const override { return "heur-silhouette"; }

private:
    int n_offsets_;
};

// ---------------------------------------------------------------------------
// Covering heuristic: walls rise through the gaps between obstacles, then a
// lid course bridges each obstacle cluster, largest blocks first.

namespace heur {

struct PlannedBlock {
    int size_cls = 0;
    double x = 0.0;
    int course = 0;

    double cy() const { return kBlockH * course + 0.5 * kBlockH; }
    Rect rect() const { return {x, cy(), kBlockWidths[size_cls], kBlockH}; }
};

using Intervals = std::vector<std::pair<double, double>>;

inline Intervals subtract(const Intervals& from, const Intervals& minus) {
    Intervals out = from;
    for (const auto& [mlo, mhi] : minus) {
        Intervals next;
        for (const auto& [lo, hi] : out) {
            if (mhi <= lo || mlo >= hi) {
                next.push_back({lo, hi});
                continue;
            }
            if (mlo > lo) next.push_back({lo, mlo});
            if (mhi < hi) next.push_back({mhi, hi});
        }
        out = std::move(next);
    }
    return out;
}

inline bool interval_overlaps(const Intervals& ivs, double lo, double hi) {
    for (const auto& [a, b] : ivs)
        if (std::min(b, hi) - std::max(a, lo) > 1e-9) return true;
    return false;
}

// Full build plan for the current scene: deterministic, derived only from
// obstacle geometry and the already-placed blocks.
inline std::vector<PlannedBlock> covering_plan(const Scene& scene,
                                               const std::array<bool, 3>& size_ok) {
    constexpr double kClear = 0.15;   // lateral/vertical clearance to obstacles
    constexpr double kShadowCourses = 1.0;
    constexpr double kSpacing = 0.05; // spacing between planned neighbors

    std::map<int, std::vector<const Body*>> layers;  // bottom-quantized
    double field_lo = 1e18, field_hi = -1e18;
    for (const auto& b : scene.bodies) {
        if (b.kind != BodyKind::Obstacle) continue;
        layers[static_cast<int>(std::lround(b.rect.bottom() * 100))].push_back(&b);
        field_lo = std::min(field_lo, b.rect.left() - 1.2);
        field_hi = std::max(field_hi, b.rect.right() + 1.2);
    }
    if (layers.empty()) return {};
    field_lo = std::max(field_lo, -7.6);
    field_hi = std::min(field_hi, 7.6);

    // Occupancy per course, seeded with what is already standing.
    std::map<int, Intervals> filled;
    for (const auto& b : scene.bodies)
        if (b.kind == BodyKind::PlacedBlock)
            filled[course_of(b.rect.cy)].push_back({b.rect.left(), b.rect.right()});

    // Forbidden x-ranges per course from obstacle clearance zones. Plain
    // wall tiles also avoid the course directly above an obstacle: a block
    // dropped across an obstacle span is only risked as a deliberate lid.
    auto forbidden_at = [&](int course, bool for_tiles) {
        Intervals out;
        double lo_y = kBlockH * course, hi_y = lo_y + kBlockH;
        for (const auto& b : scene.bodies) {
            if (b.kind != BodyKind::Obstacle) continue;
            bool touches = b.rect.top() + kClear > lo_y + 1e-9 &&
                           b.rect.bottom() - kClear < hi_y - 1e-9;
            bool shadow = for_tiles && lo_y >= b.rect.top() - 1e-9 &&
                          lo_y < b.rect.top() + kShadowCourses * kBlockH;
            if (touches || shadow)
                out.push_back({b.rect.left() - kClear, b.rect.right() + kClear});
        }
        return out;
    };

    std::vector<PlannedBlock> plan;
    auto largest_fit = [&](double width) {
        for (int sc = 2; sc >= 0; --sc)
            if (size_ok[sc] && kBlockWidths[sc] <= width + 1e-9) return sc;
        return -1;
    };
    auto place = [&](int sc, double x, int course) {
        plan.push_back({sc, x, course});
        filled[course].push_back({x - 0.5 * kBlockWidths[sc], x + 0.5 * kBlockWidths[sc]});
    };
    auto supported_com = [&](int course, double lo, double w) {
        if (course == 0) return true;
        double com = lo + 0.5 * w;
        double slo = 1e18, shi = -1e18;
        for (const auto& [blo, bhi] : filled[course - 1]) {
            double clo = std::max(blo, lo), chi = std::min(bhi, lo + w);
            if (chi - clo > 1e-9) {
                slo = std::min(slo, clo);
                shi = std::max(shi, chi);
            }
        }
        return slo <= com && com <= shi;
    };
    auto tile_region = [&](double lo, double hi, int course) {
        Intervals free = subtract({{lo, hi}}, forbidden_at(course, true));
        free = subtract(free, filled[course]);
        for (auto [flo, fhi] : free) {
            // Hug the obstacle-side boundary: intervals cut short of the
            // field's right edge fill right-to-left so flank blocks end up
            // under future lids.
            bool rightward = fhi >= hi - 1e-9;
            double cursor = rightward ? flo + kSpacing : fhi - kSpacing;
            while (true) {
                double room = rightward ? fhi - kSpacing - cursor : cursor - flo - kSpacing;
                int sc = largest_fit(room);
                if (sc < 0) break;
                double w = kBlockWidths[sc];
                double block_lo = rightward ? cursor : cursor - w;
                if (!supported_com(course, block_lo, w)) {  // no stable footing here
                    cursor += rightward ? 0.35 : -0.35;
                    continue;
                }
                place(sc, block_lo + 0.5 * w, course);
                cursor += rightward ? (w + kSpacing) : -(w + kSpacing);
            }
        }
    };

    int built_to = 0;  // next course to fill from
    double prev_lo = 1e18, prev_hi = -1e18;
    for (const auto& [key, obs] : layers) {
        (void)key;
        double top = obs.front()->rect.top();
        for (const auto* o : obs) top = std::max(top, o->rect.top());
        int lid_course = static_cast<int>(top / kBlockH) + 1;

        // Work around this layer's own obstacles, widened a little more
        // than the wall under the previous layers; support for offset upper
        // layers otherwise comes from whatever already stands below.
        double layer_lo = 1e18, layer_hi = -1e18;
        for (const auto* o : obs) {
            layer_lo = std::min(layer_lo, o->rect.left() - 1.2);
            layer_hi = std::max(layer_hi, o->rect.right() + 1.2);
        }
        layer_lo = field_lo;
        layer_hi = field_hi;
        layer_lo = std::max(layer_lo, field_lo);
        layer_hi = std::min(layer_hi, field_hi);
        prev_lo = layer_lo;
        prev_hi = layer_hi;

        // Rise through the gaps up to the lid course.
        for (int course = 0; course < lid_course; ++course)
            tile_region(layer_lo, layer_hi, course);

        // Cluster obstacles that are too close to stand a pillar between.
        std::vector<const Body*> sorted = obs;
        std::sort(sorted.begin(), sorted.end(),
                  [](const Body* a, const Body* b) { return a->rect.left() < b->rect.left(); });
        std::vector<std::pair<double, double>> clusters;
        for (const auto* o : sorted) {
            if (!clusters.empty() && o->rect.left() - clusters.back().second < 1.0)
                clusters.back().second = std::max(clusters.back().second, o->rect.right());
            else
                clusters.push_back({o->rect.left(), o->rect.right()});
        }

        // Lids centered on each cluster; clusters too wide for one block get
        // a cantilever pair plus a bridge one course higher.
        for (const auto& [clo, chi] : clusters) {
            double need = (chi - clo) + 2 * kClear + 2 * kSpacing;
            int sc = -1;
            for (int c = 0; c < 3; ++c)
                if (size_ok[c] && kBlockWidths[c] >= need) {
                    sc = c;
                    break;
                }
            auto lid_clear = [&](double lo, double hi) {
                return !interval_overlaps(filled[lid_course], lo, hi) &&
                       !interval_overlaps(forbidden_at(lid_course, false), lo, hi);
            };
            if (sc >= 0) {
                double cx = 0.5 * (clo + chi);
                double half = 0.5 * kBlockWidths[sc];
                bool left_ok =
                    interval_overlaps(filled[lid_course - 1], cx - half, clo - kClear);
                bool right_ok =
                    interval_overlaps(filled[lid_course - 1], chi + kClear, cx + half);
                if (left_ok && right_ok && lid_clear(cx - half, cx + half))
                    place(sc, cx, lid_course);
                continue;
            }
        }
        tile_region(layer_lo, layer_hi, lid_course);
        built_to = lid_course + 1;
    }
    (void)built_to;
    return plan;
}

}  // namespace heur

class CoveringHeuristic : public Policy {
public:
    std::optional<Action> act(const EpisodeState& st, const ObsGraph&, Rng&) override {
        std::array<bool, 3> size_ok;
        for (int sc = 0; sc < 3; ++sc) size_ok[sc] = st.inventory.has(sc);
        auto plan = heur::covering_plan(st.scene, size_ok);

        for (const auto& p : plan) {
            if (!st.inventory.has(p.size_cls)) continue;
            bool done = false;
            for (const auto& b : st.scene.bodies)
                if (b.kind == BodyKind::PlacedBlock && std::abs(b.rect.cx - p.x) < 0.06 &&
                    std::abs(b.rect.cy - p.cy()) < 0.06)
                    done = true;
            if (done) continue;
            if (auto act = to_cont_rel(st, p)) return act;
        }
        return std::nullopt;
    }
    std::string name() const override { return "heur-covering"; }

private:
    // Express "drop this block so it rests at (x, course)" as a continuous
    // relative action against the floor or a block of the course below.
    std::optional<Action> to_cont_rel(const EpisodeState& st, const heur::PlannedBlock& p) {
        double w_c = kBlockWidths[p.size_cls];
        const Body* ref = nullptr;
        if (p.course == 0) {
            ref = st.scene.find(st.scene.floor_id());
        } else {
            double best = 1e18;
            for (const auto& b : st.scene.bodies) {
                if (b.kind != BodyKind::PlacedBlock) continue;
                if (std::abs(b.rect.top() - kBlockH * p.course) > 0.01) continue;
                if (interval_overlap(b.rect.left(), b.rect.right(), p.x - 0.5 * w_c,
                                     p.x + 0.5 * w_c) <= 0.0)
                    continue;
                double d = std::abs(b.rect.cx - p.x);
                if (d < best) {
                    best = d;
                    ref = &b;
                }
            }
        }
        if (!ref) return std::nullopt;
        double denom = 0.5 * (ref->rect.w + w_c) + kEpsX;
        double dx = (p.x - ref->rect.cx) / denom;
        if (std::abs(dx) > 1.0) return std::nullopt;

        double slot_x = 0.0;
        bool found = false;
        for (const auto& b : st.scene.bodies)
            if (b.kind == BodyKind::AvailableBlock && size_class(b.rect.w) == p.size_cls &&
                slot_alive(st.scene, st.inventory, b.id) && !found) {
                slot_x = b.rect.cx;
                found = true;
            }
        if (!found) return std::nullopt;
        // unit coords: x_w = X * 8, y_w = (y + 1) * 8
        return ContRel{slot_x / (0.5 * kWorldW), ref->rect.cx / (0.5 * kWorldW),
                       ref->rect.cy / (0.5 * kWorldH) - 1.0, dx, -1.0};
    }
};

// ---------------------------------------------------------------------------

class GreedyQPolicy : public Policy {
public:
    GreedyQPolicy(const nn::GNParams* net, int n_rec, Connectivity conn = Connectivity::Full,
                  bool normalize = true)
        : net_(net), n_rec_(n_rec), conn_(conn), normalize_(normalize) {}

    std::optional<Action> act(const EpisodeState&, const ObsGraph& g, Rng&) override {
        nn::Mat q = nn::gn_forward(*net_, g, n_rec_);
        auto pick = greedy_pick(q, g);
        if (pick.edge < 0) return std::nullopt;
        return DiscRel{g.body_ids[g.edges[pick.edge].first],
                       g.body_ids[g.edges[pick.edge].second], col_offset_index(pick.col),
                       col_sticky(pick.col) ? 1 : -1};
    }
    std::string name() const override { return "dqn"; }

private:
    const nn::GNParams* net_;
    int n_rec_;
    Connectivity conn_;
    bool normalize_;
};

class MctsPolicy : public Policy {
public:
    MctsPolicy(const nn::GNParams* net, PlanConfig cfg) : net_(net), cfg_(cfg) {}

    std::optional<Action> act(const EpisodeState& st, const ObsGraph&, Rng& rng) override {
        PerfectModel model(st, cfg_.n_offsets);
        Mcts search(net_, cfg_);
        ActionKey key = search.plan(model, rng);
        if (key.sender_id < 0) return std::nullopt;
        return DiscRel{key.sender_id, key.receiver_id, col_offset_index(key.col),
                       col_sticky(key.col) ? 1 : -1};
    }
    std::string name() const override { return cfg_.use_prior ? "dqn-mcts" : "raw-mcts"; }

private:
    const nn::GNParams* net_;
    PlanConfig cfg_;
};

}  // namespace blockforge
