#include <algorithm>
#include <cmath>

#include "actuforge/analysis.hpp"
#include "actuforge/errors.hpp"

namespace actuforge {
namespace {

constexpr double kTol = 1e-9;

double scale_of(const Eigen::VectorXd& v) { return std::max(1.0, v.lpNorm<Eigen::Infinity>()); }

bool inside(const std::vector<Halfspace>& hs, const Eigen::VectorXd& x) {
  for (const auto& h : hs) {
    if (h.normal.dot(x) > h.offset + kTol * std::max(1.0, std::abs(h.offset))) return false;
  }
  return true;
}

void add_unique(std::vector<Eigen::VectorXd>& pts, Eigen::VectorXd x) {
  for (const auto& p : pts) {
    if ((p - x).lpNorm<Eigen::Infinity>() <= kTol * scale_of(x)) return;
  }
  pts.push_back(std::move(x));
}

/// Orders points of a planar polygon counter-clockwise around their centroid,
/// seen from the side `normal` points to.
void order_around(std::vector<Eigen::Vector3d>& pts, const Eigen::Vector3d& normal) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Eigen::Vector3d u = normal.unitOrthogonal();
  Eigen::Vector3d v = normal.normalized().cross(u);
  std::sort(pts.begin(), pts.end(), [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return std::atan2((a - c).dot(v), (a - c).dot(u)) < std::atan2((b - c).dot(v), (b - c).dot(u));
  });
}

double polygon_area_2d(std::vector<Eigen::VectorXd> pts) {
  if (pts.size() < 3) return 0.0;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p.head<2>();
  c /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::atan2(a(1) - c(1), a(0) - c(0)) < std::atan2(b(1) - c(1), b(0) - c(0));
  });
  double area = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % pts.size()];
    area += p(0) * q(1) - q(0) * p(1);
  }
  return std::abs(area) / 2.0;
}

double polytope_volume_3d(const std::vector<Eigen::VectorXd>& vertices,
                          const std::vector<Halfspace>& hs) {
  if (vertices.size() < 4) return 0.0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  for (const auto& v : vertices) center += v.head<3>();
  center /= static_cast<double>(vertices.size());
  double volume = 0.0;
  for (const auto& h : hs) {
    std::vector<Eigen::Vector3d> face;
    for (const auto& v : vertices) {
      if (std::abs(h.normal.dot(v) - h.offset) <= 1e-7 * std::max(1.0, std::abs(h.offset))) {
        face.push_back(v.head<3>());
      }
    }
    if (face.size() < 3) continue;
    const Eigen::Vector3d n = h.normal.head<3>();
    order_around(face, n);
    Eigen::Vector3d area_vec = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < face.size(); ++i) {
      area_vec += face[i].cross(face[(i + 1) % face.size()]);
    }
    const double area = 0.5 * std::abs(area_vec.dot(n));
    const double height = h.offset - n.dot(center);
    volume += area * std::max(0.0, height) / 3.0;
  }
  return volume;
}

}  // namespace

CapabilityPolytope polytope_from_halfspaces(std::vector<Halfspace> halfspaces, PolytopeSpace space) {
  CapabilityPolytope p;
  p.space = space;
  if (halfspaces.empty()) throw ValidationError("halfspaces", "at least one halfspace");
  const Eigen::Index d = halfspaces.front().normal.size();
  if (d != 2 && d != 3) throw ValidationError("halfspaces", "dimension 2 or 3");

  // Normalize, drop trivially satisfied zero rows and duplicate planes.
  std::vector<Halfspace> hs;
  for (auto& h : halfspaces) {
    if (h.normal.size() != d) throw ValidationError("halfspaces", "consistent dimension");
    const double norm = h.normal.norm();
    if (norm <= 1e-12) {
      if (h.offset < -kTol) {
        p.halfspaces = std::move(halfspaces);
        return p;  // empty set
      }
      continue;
    }
    Halfspace n{h.normal / norm, h.offset / norm};
    const bool dup = std::any_of(hs.begin(), hs.end(), [&](const Halfspace& o) {
      return (o.normal - n.normal).lpNorm<Eigen::Infinity>() <= kTol &&
             std::abs(o.offset - n.offset) <= kTol * std::max(1.0, std::abs(n.offset));
    });
    if (!dup) hs.push_back(std::move(n));
  }
  p.halfspaces = hs;

  const std::size_t m = hs.size();
  Eigen::MatrixXd A(d, d);
  Eigen::VectorXd b(d);
  auto try_vertex = [&](const std::vector<std::size_t>& idx) {
    for (Eigen::Index r = 0; r < d; ++r) {
      A.row(r) = hs[idx[r]].normal.transpose();
      b(r) = hs[idx[r]].offset;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (std::abs(lu.determinant()) <= 1e-12) return;
    Eigen::VectorXd x = lu.solve(b);
    if (inside(hs, x)) add_unique(p.vertices, std::move(x));
  };
  if (d == 2) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) try_vertex({i, j});
    p.volume = polygon_area_2d(p.vertices);
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j)
        for (std::size_t k = j + 1; k < m; ++k) try_vertex({i, j, k});
    p.volume = polytope_volume_3d(p.vertices, hs);
  }
  return p;
}

}  // namespace actuforge
