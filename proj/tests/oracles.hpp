#pragma once

// Independent numerical oracles used only by the tests.

#include <cmath>
#include <functional>
#include <random>

#include "penning/vec3.hpp"

namespace oracle {

using Potential = std::function<double(const penning::Vec3&)>;

/// Fourth-order central difference of -grad phi.
inline penning::Vec3 fd_efield(const Potential& phi, const penning::Vec3& r, double h) {
  auto d = [&](const penning::Vec3& e) {
    return (-phi(r + 2 * h * e) + 8 * phi(r + h * e) - 8 * phi(r - h * e) + phi(r - 2 * h * e)) / (12 * h);
  };
  return {-d({1, 0, 0}), -d({0, 1, 0}), -d({0, 0, 1})};
}

/// Second derivative d^2 phi / (de1 de2) by central differences.
inline double fd_second(const Potential& phi, const penning::Vec3& r, const penning::Vec3& e1,
                        const penning::Vec3& e2, double h) {
  return (phi(r + h * e1 + h * e2) - phi(r + h * e1 - h * e2) - phi(r - h * e1 + h * e2) +
          phi(r - h * e1 - h * e2)) /
         (4 * h * h);
}

/// Seven-point Laplacian, Richardson-extrapolated from steps h and 2h (fourth order).
inline double fd_laplacian(const Potential& phi, const penning::Vec3& r, double h) {
  const double c = phi(r);
  auto lap = [&](double s) {
    double sum = 0;
    for (const penning::Vec3 e : {penning::Vec3{1, 0, 0}, penning::Vec3{0, 1, 0}, penning::Vec3{0, 0, 1}})
      sum += phi(r + s * e) - 2 * c + phi(r - s * e);
    return sum / (s * s);
  };
  return (4 * lap(h) - lap(2 * h)) / 3;
}

/// Sum of |second derivative| along the axes; scale for relative Laplacian checks.
inline double fd_curvature_scale(const Potential& phi, const penning::Vec3& r, double h) {
  const double c = phi(r);
  double sum = 0;
  for (const penning::Vec3 e : {penning::Vec3{1, 0, 0}, penning::Vec3{0, 1, 0}, penning::Vec3{0, 0, 1}})
    sum += std::abs(phi(r + h * e) - 2 * c + phi(r - h * e));
  return sum / (h * h);
}

inline penning::Vec3 random_point(std::mt19937_64& rng, double half_width) {
  std::uniform_real_distribution<double> u(-half_width, half_width);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace oracle
