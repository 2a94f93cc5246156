#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "penning/analytic_fields.hpp"

using namespace penning;
using constants::mm;

namespace {

// Distance from r to the nearest wire axis of a set.
double wire_clearance(const LogWireSet& set, const Vec3& r) {
  double best = 1e9;
  for (const auto& w : set.wires()) {
    const double t = (w.axis == WireAxis::parallel_to_y ? r.x : r.y) - w.transverse_offset;
    best = std::min(best, std::hypot(t, r.z - w.z_offset));
  }
  return best;
}

std::vector<Vec3> off_wire_points(const LogWireSet& set, int count, double half_width, double clearance,
                                  unsigned seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vec3> pts;
  while (static_cast<int>(pts.size()) < count) {
    const Vec3 r = oracle::random_point(rng, half_width);
    if (wire_clearance(set, r) > clearance) pts.push_back(r);
  }
  return pts;
}

}  // namespace

TEST(SixWire, MirrorSymmetry) {
  const SixWireSpec spec;
  const auto set = make_six_wire(spec);
  for (const Vec3& r : off_wire_points(set, 100, 6 * mm, 0.8 * mm, 1)) {
    const double a = set.potential(r);
    const double b = set.potential({r.y, r.x, -r.z});
    EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
  }
}

TEST(SixWire, ZeroDriveIsZeroEverywhere) {
  SixWireSpec spec;
  spec.delta_V = 0.0;
  std::mt19937_64 rng(2);
  for (int n = 0; n < 50; ++n) {
    const Vec3 r = oracle::random_point(rng, 1 * mm);
    EXPECT_EQ(six_wire_potential(spec, r), 0.0);
  }
}

TEST(SixWire, PrototypeHasAxialExtremumAtCentre) {
  const SixWireSpec spec;  // d = 3 mm, 2 z0 = 4 mm, a = 1 mm, dV = -1.3 V
  const auto set = make_six_wire(spec);
  EXPECT_NEAR(set.efield({0, 0, 0}).z, 0.0, 1e-12);
  // 1-D scan: phi(0,0,z) - phi(0) keeps one sign on both sides of z = 0.
  const double p0 = set.potential({0, 0, 0});
  const double sign = set.potential({0, 0, 0.1 * mm}) - p0;
  for (double z = -1.2 * mm; z <= 1.2 * mm; z += 0.05 * mm) {
    if (std::abs(z) < 1e-9) continue;
    EXPECT_GT((set.potential({0, 0, z}) - p0) * sign, 0.0) << "z = " << z;
  }
}

TEST(SixWire, SingularOnWireAxis) {
  const SixWireSpec spec;
  EXPECT_THROW(six_wire_potential(spec, {spec.d, 0.0, -spec.z0}), SingularPoint);
  EXPECT_THROW(make_six_wire(spec).efield({0.0, 0.1 * mm, spec.z0 + 0.2 * mm}), SingularPoint);
  EXPECT_EQ(make_six_wire(spec).classify({0.0, 0.1 * mm, spec.z0 + 0.2 * mm}), Region::electrode);
}

TEST(SixWire, RejectsThickWires) {
  SixWireSpec spec;
  spec.a = spec.d / 2;
  EXPECT_THROW(make_six_wire(spec), InvalidArgument);
}

TEST(TwoWire, OriginValue) {
  const TwoWireSpec spec;  // V+ = 4 V, a = 0.5 mm, z0 = 2 mm, R = 100 mm
  const double L = std::log(spec.R * spec.R / (spec.a * spec.z0));
  EXPECT_DOUBLE_EQ(two_wire_potential(spec, {0, 0, 0}),
                   2 * spec.v_plus / L * std::log(spec.R * spec.R / (spec.z0 * spec.z0)));
  // Hand evaluation: R^2/z0^2 = 2500 and R^2/(a z0) = 1e4, so 8 ln 2500 / ln 1e4.
  EXPECT_NEAR(two_wire_potential(spec, {0, 0, 0}), 8 * std::log(2500.0) / std::log(1e4), 1e-12);
  EXPECT_NEAR(two_wire_potential(spec, {0, 0, 0}), 6.7959, 1e-4);
}

TEST(TwoWire, QuadraticConstantMatchesExact) {
  const TwoWireSpec spec;
  EXPECT_NEAR(two_wire_quadratic(spec).phi0, two_wire_potential(spec, {0, 0, 0}), 1e-12);
}

TEST(TwoWire, ZeroDriveQuadraticIsZero) {
  TwoWireSpec spec;
  spec.v_plus = 0.0;
  const auto q = two_wire_quadratic(spec);
  EXPECT_EQ(q.phi0, 0.0);
  EXPECT_EQ(q.curvature_coefficient, 0.0);
}

TEST(TwoWire, QuadraticMatchesFiniteDifferenceHessian) {
  const TwoWireSpec spec;
  const auto set = make_two_wire(spec);
  const oracle::Potential phi = [&](const Vec3& r) { return set.potential(r); };
  const double c = two_wire_quadratic(spec).curvature_coefficient;
  const double h = 5e-7;
  const Vec3 ex{1, 0, 0}, ey{0, 1, 0}, ez{0, 0, 1};
  const Vec3 o{0, 0, 0};
  EXPECT_NEAR(oracle::fd_second(phi, o, ex, ex, h) / (2 * c), 1.0, 1e-6);
  EXPECT_NEAR(oracle::fd_second(phi, o, ey, ey, h) / (2 * c), 1.0, 1e-6);
  EXPECT_NEAR(oracle::fd_second(phi, o, ez, ez, h) / (-4 * c), 1.0, 1e-6);
  // Off-diagonal entries vanish: the Hessian is diag(1, 1, -2) x 2c.
  EXPECT_NEAR(oracle::fd_second(phi, o, ex, ey, h) / c, 0.0, 1e-6);
  EXPECT_NEAR(oracle::fd_second(phi, o, ex, ez, h) / c, 0.0, 1e-6);
  EXPECT_NEAR(oracle::fd_second(phi, o, ey, ez, h) / c, 0.0, 1e-6);
  EXPECT_NEAR(c, -spec.v_plus / (spec.z0 * spec.z0 * spec.log_factor()), 1e-9 * std::abs(c));
}

TEST(TwoWire, QuadraticApproximatesExactAlongAxes) {
  const TwoWireSpec spec;
  const auto set = make_two_wire(spec);
  const auto quad = two_wire_quadrupole(spec);
  const double p0 = set.potential({0, 0, 0});
  for (const Vec3 dir : {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}, Vec3{-1, 0, 0}, Vec3{0, 0, -1}})
    for (double s = 0.005; s <= 0.05; s += 0.005) {
      const Vec3 r = s * spec.z0 * dir;
      EXPECT_LT(std::abs(quad.potential(r) - set.potential(r)) / std::abs(set.potential(r) - p0), 0.05);
    }
}

TEST(TwoWire, QuadraticApproximatesExactInRmsOverBall) {
  const TwoWireSpec spec;
  const auto set = make_two_wire(spec);
  const auto quad = two_wire_quadrupole(spec);
  const double p0 = set.potential({0, 0, 0});
  std::mt19937_64 rng(3);
  double num = 0, den = 0;
  int n = 0;
  while (n < 2000) {
    const Vec3 r = oracle::random_point(rng, 0.05 * spec.z0);
    if (norm(r) > 0.05 * spec.z0) continue;
    num += std::pow(quad.potential(r) - set.potential(r), 2);
    den += std::pow(set.potential(r) - p0, 2);
    ++n;
  }
  EXPECT_LT(std::sqrt(num / den), 0.05);
}

TEST(TwoWire, RejectsDegenerateNormalisation) {
  TwoWireSpec spec;
  spec.R = 0.5 * mm;
  EXPECT_THROW(make_two_wire(spec), InvalidArgument);
}

TEST(AxialFrequency, ScalesAsSqrtOfDrive) {
  TwoWireSpec spec;
  const double w1 = axial_frequency_two_wire(spec, calcium_ion());
  spec.v_plus *= 2;
  EXPECT_NEAR(axial_frequency_two_wire(spec, calcium_ion()) / w1, std::sqrt(2.0), 1e-14);
}

TEST(AxialFrequency, CalciumInTwoWireTrap) {
  // omega_z^2 = 4 q V+ / (m z0^2 ln(R^2/a z0)) with q/m = 2.41213e6 C/kg.
  const double w = axial_frequency_two_wire(TwoWireSpec{}, calcium_ion());
  EXPECT_NEAR(w, 1.02351e6, 1e2);
}

TEST(AxialFrequency, DeconfiningSignThrows) {
  TwoWireSpec spec;
  spec.v_plus = -4.0;
  EXPECT_THROW(axial_frequency_two_wire(spec, calcium_ion()), NoAxialConfinement);
  EXPECT_NO_THROW(axial_frequency_two_wire(spec, electron()));
}

TEST(Cyclotron, CalciumPeriods) {
  const Species ca = calcium_ion();
  EXPECT_NEAR(cyclotron_period(ca, 1.0), 2.6e-6, 0.02 * 2.6e-6);
  EXPECT_NEAR(cyclotron_period(ca, 10.0), 260e-9, 0.02 * 260e-9);
  EXPECT_NEAR(cyclotron_frequency(ca, 1.0), 2.4121333e6, 1.0);
}

TEST(Cyclotron, MassScalingAndErrors) {
  const double w1 = cyclotron_frequency(species_from_amu(40, 1), 1.0);
  const double w2 = cyclotron_frequency(species_from_amu(80, 1), 1.0);
  EXPECT_NEAR(w2, w1 / 2, 1e-9 * w1);
  EXPECT_THROW(cyclotron_frequency(calcium_ion(), 0.0), InvalidArgument);
  EXPECT_THROW(cyclotron_frequency(calcium_ion(), -1.0), InvalidArgument);
}

TEST(ModeFrequencies, Limits) {
  const auto free = mode_frequencies(0.0, 5.0);
  EXPECT_DOUBLE_EQ(free.omega_plus, 5.0);
  EXPECT_DOUBLE_EQ(free.omega_minus, 0.0);
  const double wc = 3.0;
  const auto edge = mode_frequencies(wc / std::sqrt(2.0), wc);
  EXPECT_NEAR(edge.omega_plus, wc / 2, 1e-7);
  EXPECT_NEAR(edge.omega_minus, wc / 2, 1e-7);
  EXPECT_THROW(mode_frequencies(wc, wc), UnstableTrap);
}

TEST(ModeFrequencies, SumAndProductIdentities) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 1000; ++n) {
    const double wc = 1e3 + 1e7 * u(rng);
    const double wz = 0.7071 * wc * u(rng);
    const auto m = mode_frequencies(wz, wc);
    EXPECT_NEAR(m.omega_plus + m.omega_minus, wc, 1e-12 * wc);
    EXPECT_NEAR(m.omega_plus * m.omega_minus, wz * wz / 2, 1e-12 * std::max(wz * wz / 2, 1e-300));
  }
}

TEST(Efield, SixWireFieldIndependentOfReference) {
  SixWireSpec a, b;
  b.R = 1.0;
  const auto sa = make_six_wire(a), sb = make_six_wire(b);
  for (const Vec3& r : off_wire_points(sa, 100, 6 * mm, 0.6 * mm, 5)) {
    const Vec3 ea = sa.efield(r), eb = sb.efield(r);
    EXPECT_LE(norm(ea - eb), 1e-12 * norm(ea));
  }
}

TEST(Efield, ZeroAtSixWireCentre) { EXPECT_LT(norm(make_six_wire(SixWireSpec{}).efield({0, 0, 0})), 1e-12); }

TEST(Efield, MatchesFiniteDifferences) {
  for (const LogWireSet& set : {make_six_wire(SixWireSpec{}), make_two_wire(TwoWireSpec{})}) {
    const oracle::Potential phi = [&](const Vec3& r) { return set.potential(r); };
    for (const Vec3& r : off_wire_points(set, 100, 6 * mm, 1.0 * mm, 6)) {
      const Vec3 e = set.efield(r);
      const Vec3 fd = oracle::fd_efield(phi, r, 1e-6);
      EXPECT_LE(norm(e - fd), 1e-8 * norm(e)) << r;
    }
  }
}

TEST(Efield, LogPotentialsAreHarmonic) {
  for (const LogWireSet& set : {make_six_wire(SixWireSpec{}), make_two_wire(TwoWireSpec{})}) {
    const oracle::Potential phi = [&](const Vec3& r) { return set.potential(r); };
    for (const Vec3& r : off_wire_points(set, 100, 6 * mm, 1.0 * mm, 8)) {
      EXPECT_LE(std::abs(oracle::fd_laplacian(phi, r, 2e-6)), 1e-6 * oracle::fd_curvature_scale(phi, r, 2e-6)) << r;
    }
  }
}

TEST(SixWire, CentreIsAxialMinimumForEqualDrive) {
  // Confining sign for positive ions: the central wires sit above the outer ones.
  SixWireSpec spec;
  spec.delta_V = 1.3;
  const auto set = make_six_wire(spec);
  double best_z = 1, best = 1e9;
  for (double z = -1.0 * mm; z <= 1.0 * mm; z += 0.01 * mm) {
    const double p = set.potential({0, 0, z});
    if (p < best) best = p, best_z = z;
  }
  EXPECT_NEAR(best_z, 0.0, 1e-9);
}

TEST(SixWire, ThreeAxialMinimaAndSignFlip) {
  SixWireSpec spec;
  spec.delta_V = 1.3;
  const auto set = make_six_wire(spec);
  // Interior local minima of phi(0, 0, z) on each wire-free stretch of the axis.
  auto minima = [](const LogWireSet& f, double lo, double hi) {
    int count = 0;
    const double step = 0.005 * mm;
    for (double z = lo + step; z < hi - step; z += step) {
      const double a = f.potential({0, 0, z - step}), b = f.potential({0, 0, z}), c = f.potential({0, 0, z + step});
      count += b < a && b < c;
    }
    return count;
  };
  EXPECT_EQ(minima(set, -20 * mm, -2.6 * mm), 1);
  EXPECT_EQ(minima(set, -1.4 * mm, 1.4 * mm), 1);
  EXPECT_EQ(minima(set, 2.6 * mm, 20 * mm), 1);

  spec.delta_V = -1.3;
  const auto flipped = make_six_wire(spec);
  const double h = 0.01 * mm;
  EXPECT_LT(flipped.potential({0, 0, h}), flipped.potential({0, 0, 0}));
  EXPECT_LT(flipped.potential({0, 0, -h}), flipped.potential({0, 0, 0}));
  EXPECT_EQ(minima(flipped, -1.4 * mm, 1.4 * mm), 0);
}
