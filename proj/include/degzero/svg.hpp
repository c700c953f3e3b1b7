#pragma once
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace degzero::svg {

struct XY {
    double x = 0, y = 0;
};

struct Box {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -std::numeric_limits<double>::infinity();
    double ymin = std::numeric_limits<double>::infinity(), ymax = -std::numeric_limits<double>::infinity();
    void add(XY p) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double diagonal() const { return std::hypot(width(), height()); }
};

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct GridStyle {
    std::string title;
    double stroke = 0.0;
};

// Cell-centred grid: values[iy * xs.size() + ix], NaN cells are left white.
// Gray level is linear in the value: min -> black, max -> white.
inline std::string emit_grid(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& values,
                             const GridStyle& style = {}) {
    if (xs.empty() || ys.empty() || values.size() != xs.size() * ys.size()) throw EmptyData("grid SVG needs a non-empty rectangular grid");
    auto step = [](const std::vector<double>& v) { return v.size() > 1 ? (v.back() - v.front()) / (v.size() - 1) : 1.0; };
    const double dx = step(xs) != 0 ? std::abs(step(xs)) : 1.0, dy = step(ys) != 0 ? std::abs(step(ys)) : 1.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values)
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const double x0 = std::min(xs.front(), xs.back()) - dx / 2, y0 = std::min(ys.front(), ys.back()) - dy / 2;
    const double W = dx * xs.size(), H = dy * ys.size();
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << num(x0) << ' ' << num(-(y0 + H)) << ' ' << num(W) << ' ' << num(H)
       << "\" preserveAspectRatio=\"none\">\n";
    if (!style.title.empty()) os << "<title>" << style.title << "</title>\n";
    os << "<rect x=\"" << num(x0) << "\" y=\"" << num(-(y0 + H)) << "\" width=\"" << num(W) << "\" height=\"" << num(H)
       << "\" fill=\"white\"/>\n";
    for (std::size_t iy = 0; iy < ys.size(); ++iy)
        for (std::size_t ix = 0; ix < xs.size(); ++ix) {
            const double v = values[iy * xs.size() + ix];
            if (!std::isfinite(v)) continue;
            const double frac = hi > lo ? (v - lo) / (hi - lo) : 0.0;
            const int g = static_cast<int>(std::lround(255.0 * frac));
            os << "<rect class=\"cell\" x=\"" << num(xs[ix] - dx / 2) << "\" y=\"" << num(-(ys[iy] + dy / 2)) << "\" width=\""
               << num(dx) << "\" height=\"" << num(dy) << "\" fill=\"rgb(" << g << ',' << g << ',' << g << ")\"/>\n";
        }
    os << "</svg>\n";
    return os.str();
}

struct PathStyle {
    double tail_fraction = 0.1;  // highlighted part at the end of the path
};

// Polygonal outline plus the ray path; y is flipped so the picture is upright.
inline std::string emit_path(const std::vector<XY>& outline, const std::vector<XY>& path, const PathStyle& style = {}) {
    if (path.empty()) throw EmptyData("path SVG needs at least one vertex");
    Box b;
    for (auto p : outline) b.add(p);
    for (auto p : path) b.add(p);
    const double pad = 0.02 * std::max(b.width(), b.height()) + 1e-12;
    const double sw = 0.003 * std::max(b.width(), b.height()) + 1e-12;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << num(b.xmin - pad) << ' ' << num(-b.ymax - pad) << ' '
       << num(b.width() + 2 * pad) << ' ' << num(b.height() + 2 * pad) << "\">\n";
    auto points = [](const std::vector<XY>& v, std::size_t from = 0) {
        std::ostringstream s;
        for (std::size_t i = from; i < v.size(); ++i) s << (i > from ? " " : "") << num(v[i].x) << ',' << num(-v[i].y);
        return s.str();
    };
    if (!outline.empty())
        os << "<polygon class=\"domain\" points=\"" << points(outline) << "\" fill=\"none\" stroke=\"black\" stroke-width=\"" << num(2 * sw)
           << "\"/>\n";
    os << "<polyline class=\"path\" points=\"" << points(path) << "\" fill=\"none\" stroke=\"gray\" stroke-width=\"" << num(sw) << "\"/>\n";
    const auto tail = static_cast<std::size_t>(std::floor(style.tail_fraction * static_cast<double>(path.size())));
    if (tail >= 2)
        os << "<polyline class=\"tail\" points=\"" << points(path, path.size() - tail) << "\" fill=\"none\" stroke=\"crimson\" stroke-width=\""
           << num(2 * sw) << "\"/>\n";
    os << "</svg>\n";
    return os.str();
}

struct TailCluster {
    std::size_t period = 0;      // best cycle length found in the tail
    double spread = 0;           // largest |P_j - P_{j+period}| over the tail
    double reference = 0;        // bounding-box diagonal of the earlier vertices
    double ratio() const { return reference > 0 ? spread / reference : std::numeric_limits<double>::infinity(); }
};

// How tightly the last `fraction` of the vertices repeat with some period
// up to max_period, measured against the size of everything before them.
inline TailCluster tail_cluster(const std::vector<XY>& path, double fraction = 0.1, std::size_t max_period = 32) {
    const auto tail = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(path.size())));
    if (tail < 2 || path.size() < 4) throw EmptyData("tail clustering needs a longer path");
    const std::size_t start = path.size() - tail;
    TailCluster best;
    Box earlier;
    for (std::size_t i = 0; i < start; ++i) earlier.add(path[i]);
    best.reference = earlier.diagonal();
    best.spread = std::numeric_limits<double>::infinity();
    for (std::size_t q = 1; q <= max_period && q < tail; ++q) {
        double s = 0;
        for (std::size_t j = start; j + q < path.size(); ++j) s = std::max(s, std::hypot(path[j + q].x - path[j].x, path[j + q].y - path[j].y));
        if (s < best.spread * (1 - 1e-9)) {
            best.spread = s;
            best.period = q;
        }
    }
    return best;
}

}  // namespace degzero::svg
