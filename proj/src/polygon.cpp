#include "actuforge/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "actuforge/errors.hpp"

namespace actuforge {
namespace {

double cross(OperatingPoint o, OperatingPoint a, OperatingPoint b) {
  return (a.velocity - o.velocity) * (b.torque - o.torque) -
         (a.torque - o.torque) * (b.velocity - o.velocity);
}

double signed_area(const std::vector<OperatingPoint>& v) {
  double twice = 0.0;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    twice += v[j].velocity * v[i].torque - v[i].velocity * v[j].torque;
  }
  return 0.5 * twice;
}

}  // namespace

ConvexPolygon ConvexPolygon::from_points(std::vector<OperatingPoint> points) {
  if (points.size() < 3) {
    throw ValidationError("polygon", "at least 3 vertices");
  }
  for (const auto& p : points) {
    if (!std::isfinite(p.velocity) || !std::isfinite(p.torque)) {
      throw ValidationError("polygon", "finite vertices");
    }
  }

  OperatingPoint centroid{};
  for (const auto& p : points) {
    centroid.velocity += p.velocity;
    centroid.torque += p.torque;
  }
  centroid.velocity /= static_cast<double>(points.size());
  centroid.torque /= static_cast<double>(points.size());

  const OperatingPoint first = points.front();
  auto angle = [&](OperatingPoint p) {
    return std::atan2(p.torque - centroid.torque, p.velocity - centroid.velocity);
  };
  std::stable_sort(points.begin(), points.end(),
                   [&](OperatingPoint a, OperatingPoint b) { return angle(a) < angle(b); });
  auto it = std::find(points.begin(), points.end(), first);
  std::rotate(points.begin(), it, points.end());

  // Scale-aware degeneracy threshold.
  double extent = 0.0;
  for (const auto& p : points) {
    extent = std::max({extent, std::abs(p.velocity - centroid.velocity),
                       std::abs(p.torque - centroid.torque)});
  }
  const double eps = 1e-12 * extent * extent;
  if (!(signed_area(points) > eps)) {
    throw ValidationError("polygon", "non-zero area");
  }
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(cross(points[i], points[(i + 1) % n], points[(i + 2) % n]) > eps)) {
      throw ValidationError("polygon", "strictly convex counter-clockwise vertices");
    }
  }
  return ConvexPolygon(std::move(points));
}

ConvexPolygon::ConvexPolygon(std::vector<OperatingPoint> ccw) : vertices_(std::move(ccw)) {
  const std::size_t n = vertices_.size();
  edges_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = vertices_[i];
    const auto b = vertices_[(i + 1) % n];
    // Outward normal of a CCW edge is (dy, -dx).
    double nx = b.torque - a.torque;
    double ny = -(b.velocity - a.velocity);
    const double len = std::hypot(nx, ny);
    nx /= len;
    ny /= len;
    edges_.push_back({nx, ny, nx * a.velocity + ny * a.torque});
  }
}

double ConvexPolygon::min_slack(OperatingPoint p) const {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& e : edges_) worst = std::min(worst, e.slack(p));
  return worst;
}

Interval ConvexPolygon::velocity_extent() const {
  Interval r{vertices_[0].velocity, vertices_[0].velocity};
  for (const auto& v : vertices_) {
    r.lower = std::min(r.lower, v.velocity);
    r.upper = std::max(r.upper, v.velocity);
  }
  return r;
}

std::optional<Interval> ConvexPolygon::torque_slice(double velocity) const {
  const Interval ext = velocity_extent();
  if (velocity < ext.lower || velocity > ext.upper) return std::nullopt;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = vertices_[i];
    const auto b = vertices_[(i + 1) % n];
    const double w0 = std::min(a.velocity, b.velocity);
    const double w1 = std::max(a.velocity, b.velocity);
    if (velocity < w0 || velocity > w1) continue;
    if (w1 == w0) {
      lo = std::min({lo, a.torque, b.torque});
      hi = std::max({hi, a.torque, b.torque});
      continue;
    }
    const double s = (velocity - a.velocity) / (b.velocity - a.velocity);
    const double t = a.torque + s * (b.torque - a.torque);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (lo > hi) return std::nullopt;
  return Interval{lo, hi};
}

double ConvexPolygon::area() const { return signed_area(vertices_); }

ConvexPolygon ConvexPolygon::scaled(double factor) const {
  OperatingPoint center{};
  if (min_slack({0.0, 0.0}) <= 0.0) {
    for (const auto& v : vertices_) {
      center.velocity += v.velocity;
      center.torque += v.torque;
    }
    center.velocity /= static_cast<double>(vertices_.size());
    center.torque /= static_cast<double>(vertices_.size());
  }
  std::vector<OperatingPoint> out;
  out.reserve(vertices_.size());
  for (const auto& v : vertices_) {
    out.push_back({center.velocity + factor * (v.velocity - center.velocity),
                   center.torque + factor * (v.torque - center.torque)});
  }
  return from_points(std::move(out));
}

}  // namespace actuforge
