#pragma once

#include <cstdio>
#include <sstream>
#include <string>

#include "blockforge/scene.hpp"

namespace blockforge {

// Deterministic SVG rendering. Regular blocks dark blue, sticky blocks
// light blue, obstacles red, targets light green, bond points grey circles,
// floor a black line.
inline std::string render_svg(const Scene& scene, double px_per_m = 32.0) {
    const double w = scene.world_w * px_per_m;
    const double pad_bottom = 2.5 * px_per_m;  // room for the available blocks
    const double h = scene.world_h * px_per_m + pad_bottom;
    auto X = [&](double x) { return (x + 0.5 * scene.world_w) * px_per_m; };
    auto Y = [&](double y) { return scene.world_h * px_per_m - y * px_per_m; };

    std::ostringstream out;
    char buf[256];
    auto emitf = [&](const char* fmt, auto... args) {
        std::snprintf(buf, sizeof(buf), fmt, args...);
        out << buf;
    };

    emitf("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
          "viewBox=\"0 0 %.0f %.0f\">\n",
          w, h, w, h);
    emitf("<rect x=\"0\" y=\"0\" width=\"%.0f\" height=\"%.0f\" fill=\"#ffffff\"/>\n", w, h);

    auto rect = [&](const Rect& r, const char* fill, const char* extra) {
        emitf("<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"%s/>\n",
              X(r.left()), Y(r.top()), r.w * px_per_m, r.h * px_per_m, fill, extra);
    };

    for (const auto& b : scene.bodies) {
        switch (b.kind) {
            case BodyKind::TargetBlock:
                rect(b.rect, "#a8e6a1", " stroke=\"#5aa85a\" stroke-width=\"1\"");
                break;
            case BodyKind::TargetPoint:
                emitf("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"#a8e6a1\" "
                      "stroke=\"#5aa85a\" stroke-width=\"1\"/>\n",
                      X(b.rect.cx), Y(b.rect.cy), 0.5 * b.rect.w * px_per_m);
                break;
            case BodyKind::Obstacle:
                rect(b.rect, "#d43f3f", "");
                break;
            case BodyKind::PlacedBlock:
            case BodyKind::AvailableBlock:
                rect(b.rect, b.sticky ? "#8fc3ef" : "#1f4e99", "");
                break;
            case BodyKind::Floor:
                break;
        }
    }
    // bond markers at midpoint between bonded body centers
    for (const auto& [a, b] : scene.bonds) {
        const Body* ba = scene.find(a);
        const Body* bb = scene.find(b);
        if (!ba || !bb) continue;
        double mx = 0.5 * (ba->rect.cx + bb->rect.cx);
        double my = 0.5 * (ba->rect.cy + bb->rect.cy);
        if (ba->kind == BodyKind::Floor) my = bb->rect.bottom(), mx = bb->rect.cx;
        if (bb->kind == BodyKind::Floor) my = ba->rect.bottom(), mx = ba->rect.cx;
        emitf("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"#9a9a9a\"/>\n", X(mx), Y(my));
    }
    emitf("<line x1=\"0\" y1=\"%.2f\" x2=\"%.0f\" y2=\"%.2f\" stroke=\"#000000\" "
          "stroke-width=\"2\"/>\n",
          Y(0.0), w, Y(0.0));
    out << "</svg>\n";
    return out.str();
}

}  // namespace blockforge
