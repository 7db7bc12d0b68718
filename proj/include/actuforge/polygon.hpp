#pragma once

#include <optional>
#include <vector>

namespace actuforge {

/// A point in a motor's torque-velocity plane (rad/s, N·m).
struct OperatingPoint {
  double velocity = 0.0;
  double torque = 0.0;

  bool operator==(const OperatingPoint&) const = default;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  double width() const { return upper - lower; }
  bool operator==(const Interval&) const = default;
};

/// Edge half-plane `normal_velocity * w + normal_torque * t <= offset`,
/// with a unit normal pointing out of the polygon.
struct HalfPlane {
  double normal_velocity = 0.0;
  double normal_torque = 0.0;
  double offset = 0.0;

  double slack(OperatingPoint p) const {
    return offset - (normal_velocity * p.velocity + normal_torque * p.torque);
  }
};

/// Strictly convex polygon with counter-clockwise vertex order.
class ConvexPolygon {
 public:
  /// Orders `points` counter-clockwise, keeping the first input point first.
  /// Throws ValidationError("polygon", ...) when the points are collinear,
  /// repeated, or not in convex position.
  static ConvexPolygon from_points(std::vector<OperatingPoint> points);

  const std::vector<OperatingPoint>& vertices() const { return vertices_; }
  const std::vector<HalfPlane>& edges() const { return edges_; }

  /// Smallest edge slack; non-negative inside or on the boundary.
  double min_slack(OperatingPoint p) const;
  bool contains(OperatingPoint p, double tolerance = 1e-9) const {
    return min_slack(p) >= -tolerance;
  }

  /// Torque range of the vertical slice at `velocity`; empty outside the
  /// velocity extent.
  std::optional<Interval> torque_slice(double velocity) const;
  Interval velocity_extent() const;
  double area() const;

  /// Polygon scaled by `factor` about the origin (about the vertex centroid
  /// when the origin is not interior).
  ConvexPolygon scaled(double factor) const;

  bool operator==(const ConvexPolygon& other) const {
    return vertices_ == other.vertices_;
  }

 private:
  explicit ConvexPolygon(std::vector<OperatingPoint> ccw);

  std::vector<OperatingPoint> vertices_;
  std::vector<HalfPlane> edges_;
};

}  // namespace actuforge
