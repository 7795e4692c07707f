#include "ilr/common.hpp"

#include <algorithm>
#include <limits>

namespace ilr {

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::Config:
      return 1;
    case ErrorKind::Io:
      return 2;
    case ErrorKind::Infeasible:
      return 3;
    case ErrorKind::Oracle:
      return 4;
  }
  return 1;
}

double polygon_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) * 0.5;
}

Point polygon_centroid(const Polygon& poly) {
  double a = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    const double cross = p.x * q.y - q.x * p.y;
    a += cross;
    cx += (p.x + q.x) * cross;
    cy += (p.y + q.y) * cross;
  }
  if (std::abs(a) < 1e-12) {
    Point m;
    for (const auto& p : poly) {
      m.x += p.x / static_cast<double>(poly.size());
      m.y += p.y / static_cast<double>(poly.size());
    }
    return m;
  }
  return {cx / (3.0 * a), cy / (3.0 * a)};
}

bool point_in_polygon(const Polygon& poly, Point p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

namespace {

// Orientation sign of a polygon: +1 for counter-clockwise in a y-up frame.
double orientation(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return a >= 0.0 ? 1.0 : -1.0;
}

// Inward unit normal and offset of edge i: inside iff dot(n, p) >= c.
void edge_halfplane(const Polygon& poly, std::size_t i, double orient, Point& n, double& c) {
  const Point& a = poly[i];
  const Point& b = poly[(i + 1) % poly.size()];
  double nx = -(b.y - a.y) * orient;
  double ny = (b.x - a.x) * orient;
  const double len = std::hypot(nx, ny);
  nx /= len;
  ny /= len;
  n = {nx, ny};
  c = nx * a.x + ny * a.y;
}

}  // namespace

double inside_distance(const Polygon& convex, Point p) {
  const double orient = orientation(convex);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < convex.size(); ++i) {
    Point n;
    double c = 0.0;
    edge_halfplane(convex, i, orient, n, c);
    best = std::min(best, n.x * p.x + n.y * p.y - c);
  }
  return best;
}

Polygon inset_convex(const Polygon& convex, double margin) {
  const double orient = orientation(convex);
  Polygon out = convex;
  for (std::size_t i = 0; i < convex.size() && !out.empty(); ++i) {
    Point n;
    double c = 0.0;
    edge_halfplane(convex, i, orient, n, c);
    c += margin;
    // Sutherland-Hodgman clip against dot(n, p) >= c.
    Polygon next;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const Point& s = out[k];
      const Point& e = out[(k + 1) % out.size()];
      const double ds = n.x * s.x + n.y * s.y - c;
      const double de = n.x * e.x + n.y * e.y - c;
      if (ds >= 0.0) next.push_back(s);
      if ((ds >= 0.0) != (de >= 0.0)) {
        const double t = ds / (ds - de);
        next.push_back({s.x + t * (e.x - s.x), s.y + t * (e.y - s.y)});
      }
    }
    out = std::move(next);
  }
  if (out.size() < 3 || polygon_area(out) < 1e-9) return {};
  return out;
}

Point project_onto_convex(const Polygon& convex, Point p) {
  if (convex.empty()) return p;
  if (convex.size() >= 3 && inside_distance(convex, p) >= 0.0) return p;
  Point best = convex.front();
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < convex.size(); ++i) {
    const Point& a = convex[i];
    const Point& b = convex[(i + 1) % convex.size()];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Point q{a.x + t * dx, a.y + t * dy};
    const double d2 = (q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = q;
    }
  }
  return best;
}

Box bounding_box(const Polygon& poly) {
  if (poly.empty()) return {};
  double x0 = poly[0].x, x1 = poly[0].x, y0 = poly[0].y, y1 = poly[0].y;
  for (const auto& p : poly) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const int bx = static_cast<int>(std::floor(x0));
  const int by = static_cast<int>(std::floor(y0));
  return {bx, by, static_cast<int>(std::ceil(x1)) - bx + 1, static_cast<int>(std::ceil(y1)) - by + 1};
}

}  // namespace ilr
