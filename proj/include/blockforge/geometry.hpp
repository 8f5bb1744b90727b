#pragma once

#include <algorithm>
#include <cmath>

namespace blockforge {

// Axis-aligned rectangle, center + extents. The world has no rotation.
struct Rect {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    double left() const { return cx - 0.5 * w; }
    double right() const { return cx + 0.5 * w; }
    double bottom() const { return cy - 0.5 * h; }
    double top() const { return cy + 0.5 * h; }
    double area() const { return w * h; }

    // Closed-set containment: boundary counts.
    bool contains(double x, double y) const {
        return x >= left() && x <= right() && y >= bottom() && y <= top();
    }
};

inline double interval_overlap(double lo1, double hi1, double lo2, double hi2) {
    return std::max(0.0, std::min(hi1, hi2) - std::max(lo1, lo2));
}

inline double overlap_area(const Rect& a, const Rect& b) {
    return interval_overlap(a.left(), a.right(), b.left(), b.right()) *
           interval_overlap(a.bottom(), a.top(), b.bottom(), b.top());
}

// Euclidean gap between boundaries; 0 when overlapping or touching.
inline double rect_distance(const Rect& a, const Rect& b) {
    double dx = std::max(0.0, std::max(b.left() - a.right(), a.left() - b.right()));
    double dy = std::max(0.0, std::max(b.bottom() - a.top(), a.bottom() - b.top()));
    return std::hypot(dx, dy);
}

}  // namespace blockforge
