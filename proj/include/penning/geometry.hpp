#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "penning/core.hpp"

namespace penning {

enum class Axis { x, y, z };

/// Axis-aligned box [lo, hi].
struct Box {
  Vec3 lo;
  Vec3 hi;

  bool contains(const Vec3& r) const noexcept {
    return r.x >= lo.x && r.x <= hi.x && r.y >= lo.y && r.y <= hi.y && r.z >= lo.z && r.z <= hi.z;
  }
  Box merged(const Box& o) const noexcept {
    return {{std::min(lo.x, o.lo.x), std::min(lo.y, o.lo.y), std::min(lo.z, o.lo.z)},
            {std::max(hi.x, o.hi.x), std::max(hi.y, o.hi.y), std::max(hi.z, o.hi.z)}};
  }
  Box grown(double m) const noexcept { return {lo - Vec3{m, m, m}, hi + Vec3{m, m, m}}; }
};

namespace detail {
// Axial coordinate and squared radial distance of d relative to an axis.
inline void split(const Vec3& d, Axis axis, double& axial, double& radial2) {
  switch (axis) {
    case Axis::x: axial = d.x; radial2 = d.y * d.y + d.z * d.z; break;
    case Axis::y: axial = d.y; radial2 = d.x * d.x + d.z * d.z; break;
    case Axis::z: axial = d.z; radial2 = d.x * d.x + d.y * d.y; break;
  }
}
inline Box axis_box(const Vec3& c, Axis axis, double radial, double half_axial) {
  Vec3 e{radial, radial, radial};
  switch (axis) {
    case Axis::x: e.x = half_axial; break;
    case Axis::y: e.y = half_axial; break;
    case Axis::z: e.z = half_axial; break;
  }
  return {c - e, c + e};
}
}  // namespace detail

/// Flat cylinder; `center` is the middle of its thickness.
struct Disk {
  Vec3 center;
  double radius = 0.0;
  double thickness = 0.0;
  Axis normal = Axis::z;
};

/// Flat ring r_inner <= rho <= r_outer. A small r_inner makes a disk with a hole.
struct Annulus {
  Vec3 center;
  double r_inner = 0.0;
  double r_outer = 0.0;
  double thickness = 0.0;
  Axis normal = Axis::z;
};

/// Capsule-free straight cylinder between two end points.
struct Rod {
  Vec3 a;
  Vec3 b;
  double radius = 0.0;
};

struct Torus {
  Vec3 center;
  double major_radius = 0.0;
  double minor_radius = 0.0;
  Axis normal = Axis::z;
};

using Shape = std::variant<Disk, Annulus, Rod, Torus>;

struct ElectrodeSolid {
  Shape shape;
  double voltage = 0.0;
  std::string label;

  void validate() const {
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          bool ok = true;
          if constexpr (std::is_same_v<S, Disk>) ok = s.radius > 0.0 && s.thickness > 0.0;
          if constexpr (std::is_same_v<S, Annulus>) ok = s.r_inner > 0.0 && s.r_inner < s.r_outer && s.thickness > 0.0;
          if constexpr (std::is_same_v<S, Rod>) ok = s.radius > 0.0 && norm(s.b - s.a) > 0.0;
          if constexpr (std::is_same_v<S, Torus>) ok = s.minor_radius > 0.0 && s.major_radius > s.minor_radius;
          if (!ok) throw InvalidArgument("electrode '" + label + "' has invalid dimensions");
        },
        shape);
    if (!std::isfinite(voltage)) throw InvalidArgument("electrode '" + label + "' has a non-finite voltage");
  }

  /// Membership test; `slack` widens the solid by that distance on every face.
  bool contains(const Vec3& r, double slack = 0.0) const {
    return std::visit(
        [&](const auto& s) -> bool {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Disk>) {
            double ax = 0.0, r2 = 0.0;
            detail::split(r - s.center, s.normal, ax, r2);
            const double ro = s.radius + slack;
            return std::abs(ax) <= 0.5 * s.thickness + slack && r2 <= ro * ro;
          } else if constexpr (std::is_same_v<S, Annulus>) {
            double ax = 0.0, r2 = 0.0;
            detail::split(r - s.center, s.normal, ax, r2);
            const double ro = s.r_outer + slack, ri = std::max(s.r_inner - slack, 0.0);
            return std::abs(ax) <= 0.5 * s.thickness + slack && r2 <= ro * ro && r2 >= ri * ri;
          } else if constexpr (std::is_same_v<S, Rod>) {
            const Vec3 u = s.b - s.a;
            const double len = norm(u);
            const double t = dot(r - s.a, u) / (len * len);
            if (t < -slack / len || t > 1.0 + slack / len) return false;
            const double rr = s.radius + slack;
            return norm2(r - (s.a + std::clamp(t, 0.0, 1.0) * u)) <= rr * rr;
          } else {
            double ax = 0.0, r2 = 0.0;
            detail::split(r - s.center, s.normal, ax, r2);
            const double dr = std::sqrt(r2) - s.major_radius;
            const double rr = s.minor_radius + slack;
            return dr * dr + ax * ax <= rr * rr;
          }
        },
        shape);
  }

  Box bounds() const {
    return std::visit(
        [&](const auto& s) -> Box {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Disk>) {
            return detail::axis_box(s.center, s.normal, s.radius, 0.5 * s.thickness);
          } else if constexpr (std::is_same_v<S, Annulus>) {
            return detail::axis_box(s.center, s.normal, s.r_outer, 0.5 * s.thickness);
          } else if constexpr (std::is_same_v<S, Rod>) {
            const Box a{s.a, s.a};
            return a.merged({s.b, s.b}).grown(s.radius);
          } else {
            return detail::axis_box(s.center, s.normal, s.major_radius + s.minor_radius, s.minor_radius);
          }
        },
        shape);
  }
};

using ElectrodeList = std::vector<ElectrodeSolid>;

inline Box bounds_of(const ElectrodeList& electrodes) {
  if (electrodes.empty()) throw InvalidArgument("no electrodes");
  Box b = electrodes.front().bounds();
  for (const auto& e : electrodes) b = b.merged(e.bounds());
  return b;
}

/// Index of the first electrode containing r, or -1.
inline int electrode_at(const ElectrodeList& electrodes, const Vec3& r) {
  for (std::size_t i = 0; i < electrodes.size(); ++i)
    if (electrodes[i].contains(r)) return static_cast<int>(i);
  return -1;
}

}  // namespace penning
