#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ilr {

/// Failure categories. The CLI maps each one onto a distinct exit code.
enum class ErrorKind {
  InvalidArgument,
  Config,
  Io,
  Infeasible,
  Oracle,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what) { return {ErrorKind::InvalidArgument, what}; }
inline Error config_error(const std::string& what) { return {ErrorKind::Config, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::Io, what}; }
inline Error infeasible(const std::string& what) { return {ErrorKind::Infeasible, what}; }

/// Exit codes: 1 config/usage, 2 I/O, 3 infeasible geometry, 4 oracle failure.
int exit_code_for(ErrorKind kind) noexcept;

/// Half-up rounding used wherever 8-bit output is produced.
inline double round_half_up(double v) { return std::floor(v + 0.5); }

inline std::uint8_t to_u8(double v) {
  const double r = round_half_up(v);
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

using Polygon = std::vector<Point>;

/// Axis-aligned pixel box; x,y is the top-left corner.
struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool empty() const { return w <= 0 || h <= 0; }
  bool contains(Point p) const { return p.x >= x && p.x <= x + w - 1 && p.y >= y && p.y <= y + h - 1; }
};

/// splitmix64 finaliser; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(master) ^ a) ^ b);
}

// Geometry helpers shared by the renderer, optimizer and evaluator.
double polygon_area(const Polygon& poly);
Point polygon_centroid(const Polygon& poly);
bool point_in_polygon(const Polygon& poly, Point p);
/// Signed distance from p to the boundary of a convex polygon, positive inside.
double inside_distance(const Polygon& convex, Point p);
/// Convex polygon shrunk inward by `margin` pixels. Empty if nothing survives.
Polygon inset_convex(const Polygon& convex, double margin);
/// Closest point of a convex polygon to p (p itself when inside).
Point project_onto_convex(const Polygon& convex, Point p);
Box bounding_box(const Polygon& poly);

}  // namespace ilr
