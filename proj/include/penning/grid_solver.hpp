#pragma once

// Finite-difference Laplace solver on a uniform rectilinear grid with
// Dirichlet electrodes and a grounded outer box.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "penning/core.hpp"
#include "penning/field.hpp"
#include "penning/geometry.hpp"

namespace penning {

class PotentialGrid {
 public:
  static constexpr std::int32_t kFree = -1;
  static constexpr std::int32_t kEnclosure = 0;

  PotentialGrid() = default;
  PotentialGrid(Vec3 origin, double h, std::array<int, 3> dims)
      : origin_(origin), h_(h), dims_(dims), labels_{"enclosure"} {
    if (!(h > 0.0)) throw InvalidArgument("grid spacing must be positive");
    for (int n : dims)
      if (n < 3) throw InvalidArgument("grid needs at least 3 nodes per axis");
    const auto n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    values_.assign(n, 0.0);
    mask_.assign(n, kFree);
  }

  const Vec3& origin() const noexcept { return origin_; }
  double spacing() const noexcept { return h_; }
  const std::array<int, 3>& dims() const noexcept { return dims_; }
  int nx() const noexcept { return dims_[0]; }
  int ny() const noexcept { return dims_[1]; }
  int nz() const noexcept { return dims_[2]; }
  std::size_t size() const noexcept { return values_.size(); }

  std::size_t index(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(dims_[0]) * (j + static_cast<std::size_t>(dims_[1]) * k);
  }
  Vec3 node(int i, int j, int k) const noexcept { return origin_ + Vec3{i * h_, j * h_, k * h_}; }
  Box bounds() const noexcept { return {origin_, node(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1)}; }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<std::int32_t>& mask() const noexcept { return mask_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  bool is_free(std::size_t idx) const noexcept { return mask_[idx] == kFree; }

  /// Registers an electrode label and returns its mask index.
  std::int32_t add_label(std::string label) {
    labels_.push_back(std::move(label));
    return static_cast<std::int32_t>(labels_.size() - 1);
  }
  void set_labels(std::vector<std::string> labels) { labels_ = std::move(labels); }

  void fix(std::size_t idx, double value, std::int32_t label_index) {
    values_[idx] = value;
    mask_[idx] = label_index;
  }

  /// Marks every face node as grounded enclosure.
  void ground_boundary() {
    for (int k = 0; k < nz(); ++k)
      for (int j = 0; j < ny(); ++j)
        for (int i = 0; i < nx(); ++i)
          if (i == 0 || j == 0 || k == 0 || i == nx() - 1 || j == ny() - 1 || k == nz() - 1)
            fix(index(i, j, k), 0.0, kEnclosure);
  }

  /// Copy with every fixed node set from `voltage_by_label` (indexed by mask value) and free nodes zeroed.
  PotentialGrid with_voltages(const std::vector<double>& voltage_by_label) const {
    if (voltage_by_label.size() != labels_.size()) throw InvalidArgument("voltage table does not match labels");
    PotentialGrid out = *this;
    for (std::size_t n = 0; n < size(); ++n) out.values_[n] = is_free(n) ? 0.0 : voltage_by_label[mask_[n]];
    return out;
  }

  double max_abs_fixed() const noexcept {
    double m = 0.0;
    for (std::size_t n = 0; n < size(); ++n)
      if (!is_free(n)) m = std::max(m, std::abs(values_[n]));
    return m;
  }

  // Sampling -------------------------------------------------------------

  Region classify(const Vec3& r) const {
    const Vec3 u = (r - origin_) / h_;
    if (!(u.x >= 0.0 && u.y >= 0.0 && u.z >= 0.0 && u.x <= nx() - 1 && u.y <= ny() - 1 && u.z <= nz() - 1))
      return Region::outside;
    const int i = static_cast<int>(std::lround(u.x));
    const int j = static_cast<int>(std::lround(u.y));
    const int k = static_cast<int>(std::lround(u.z));
    return is_free(index(i, j, k)) ? Region::free : Region::electrode;
  }

  double potential(const Vec3& r) const {
    check(r);
    return interpolate(r);
  }

  /// Central differences of the interpolated potential at r +- h/2 along each axis.
  /// Exact for any quadratic potential sampled on the nodes.
  Vec3 efield(const Vec3& r) const {
    check(r);
    const double s = 0.5 * h_;
    return {-(interpolate(r + Vec3{s, 0, 0}) - interpolate(r - Vec3{s, 0, 0})) / h_,
            -(interpolate(r + Vec3{0, s, 0}) - interpolate(r - Vec3{0, s, 0})) / h_,
            -(interpolate(r + Vec3{0, 0, s}) - interpolate(r - Vec3{0, 0, s})) / h_};
  }

  /// Trilinear interpolation without region checks; clamps to the box.
  double interpolate(const Vec3& r) const noexcept {
    const Vec3 u = (r - origin_) / h_;
    auto cell = [](double x, int n, int& i0, double& f) {
      x = std::clamp(x, 0.0, static_cast<double>(n - 1));
      i0 = std::min(static_cast<int>(x), n - 2);
      f = x - i0;
    };
    int i, j, k;
    double fx, fy, fz;
    cell(u.x, nx(), i, fx);
    cell(u.y, ny(), j, fy);
    cell(u.z, nz(), k, fz);
    const std::size_t sy = static_cast<std::size_t>(nx());
    const std::size_t sz = sy * static_cast<std::size_t>(ny());
    const double* p = values_.data() + index(i, j, k);
    const double c00 = p[0] + fx * (p[1] - p[0]);
    const double c10 = p[sy] + fx * (p[sy + 1] - p[sy]);
    const double c01 = p[sz] + fx * (p[sz + 1] - p[sz]);
    const double c11 = p[sz + sy] + fx * (p[sz + sy + 1] - p[sz + sy]);
    const double c0 = c00 + fy * (c10 - c00);
    const double c1 = c01 + fy * (c11 - c01);
    return c0 + fz * (c1 - c0);
  }

 private:
  void check(const Vec3& r) const {
    switch (classify(r)) {
      case Region::free: return;
      case Region::outside: {
        std::ostringstream os;
        os << "point " << r << " is outside the grid domain";
        throw DomainError(os.str());
      }
      case Region::electrode: {
        std::ostringstream os;
        os << "point " << r << " is inside an electrode";
        throw SingularPoint(os.str());
      }
    }
  }

  Vec3 origin_;
  double h_ = 0.0;
  std::array<int, 3> dims_{0, 0, 0};
  std::vector<double> values_;
  std::vector<std::int32_t> mask_;
  std::vector<std::string> labels_;
};

inline double sample_potential(const PotentialGrid& g, const Vec3& r) { return g.potential(r); }
inline Vec3 sample_efield(const PotentialGrid& g, const Vec3& r) { return g.efield(r); }

/// Shares one immutable solved grid between field consumers.
class GridField {
 public:
  explicit GridField(std::shared_ptr<const PotentialGrid> grid) : grid_(std::move(grid)) {}
  explicit GridField(PotentialGrid grid) : grid_(std::make_shared<const PotentialGrid>(std::move(grid))) {}

  double potential(const Vec3& r) const { return grid_->potential(r); }
  Vec3 efield(const Vec3& r) const { return grid_->efield(r); }
  Region classify(const Vec3& r) const { return grid_->classify(r); }
  const PotentialGrid& grid() const noexcept { return *grid_; }
  const std::shared_ptr<const PotentialGrid>& shared() const noexcept { return grid_; }

 private:
  std::shared_ptr<const PotentialGrid> grid_;
};

/// Fixes nodes inside electrodes at their voltages and the box faces at 0 V.
/// Domain with a node at `center`, covering `content` plus `margin`, symmetric
/// about `center` on every axis.
inline Box centered_domain(const Box& content, double margin, double h, const Vec3& center) {
  auto half = [&](double lo, double hi, double c) {
    return std::ceil((std::max(hi - c, c - lo) + margin) / h - 1e-9) * h;
  };
  const Vec3 e{half(content.lo.x, content.hi.x, center.x), half(content.lo.y, content.hi.y, center.y),
               half(content.lo.z, content.hi.z, center.z)};
  return {center - e, center + e};
}

inline PotentialGrid rasterize(const ElectrodeList& electrodes, const Box& domain, double h) {
  if (!(h > 0.0)) throw InvalidArgument("grid spacing must be positive");
  for (const auto& e : electrodes) e.validate();
  const Vec3 ext = domain.hi - domain.lo;
  const std::array<int, 3> dims{static_cast<int>(std::lround(ext.x / h)) + 1, static_cast<int>(std::lround(ext.y / h)) + 1,
                                static_cast<int>(std::lround(ext.z / h)) + 1};
  PotentialGrid g(domain.lo, h, dims);
  g.ground_boundary();

  const Box inner = g.bounds().grown(-5.0 * h);
  for (const auto& e : electrodes) {
    const Box b = e.bounds();
    if (!inner.contains(b.lo) || !inner.contains(b.hi))
      throw MarginError("electrode '" + e.label + "' is closer than 5 cells to the domain boundary");
  }
  // Nodes within rounding distance of a face count as inside, so mirror-image
  // electrodes on a mirror-symmetric grid rasterize identically.
  const double slack = 1e-9 * h;
  auto lo_index = [&](double v, double o, int n) { return std::clamp(static_cast<int>(std::floor((v - o) / h)), 0, n - 1); };
  auto hi_index = [&](double v, double o, int n) { return std::clamp(static_cast<int>(std::ceil((v - o) / h)), 0, n - 1); };

  for (const auto& e : electrodes) {
    const std::int32_t label = g.add_label(e.label);
    const Box b = e.bounds();
    const Vec3& o = g.origin();
    for (int k = lo_index(b.lo.z, o.z, g.nz()); k <= hi_index(b.hi.z, o.z, g.nz()); ++k)
      for (int j = lo_index(b.lo.y, o.y, g.ny()); j <= hi_index(b.hi.y, o.y, g.ny()); ++j)
        for (int i = lo_index(b.lo.x, o.x, g.nx()); i <= hi_index(b.hi.x, o.x, g.nx()); ++i) {
          if (!e.contains(g.node(i, j, k), slack)) continue;
          const std::size_t idx = g.index(i, j, k);
          if (!g.is_free(idx)) {
            if (g.values()[idx] != e.voltage)
              throw GeometryConflict("electrode '" + e.label + "' overlaps '" + g.labels()[g.mask()[idx]] +
                                     "' at a different voltage");
            continue;
          }
          g.fix(idx, e.voltage, label);
        }
  }
  return g;
}

enum class SweepOrder { red_black, lexicographic };

struct SolveOptions {
  double tol = 0.0;  // V; <= 0 selects 1e-6 x max |electrode V|
  long max_sweeps = 50000;
  SweepOrder order = SweepOrder::red_black;
  double omega = 0.0;  // <= 0 selects 2 / (1 + sin(pi / max(nx, ny, nz)))
};

struct SolveResult {
  PotentialGrid grid;
  long sweeps = 0;
  double last_update = 0.0;
};

inline double default_tolerance(const PotentialGrid& g) {
  const double vmax = g.max_abs_fixed();
  return vmax > 0.0 ? 1e-6 * vmax : 1e-12;
}

inline double optimal_sor_factor(const PotentialGrid& g) {
  const int n = std::max({g.nx(), g.ny(), g.nz()});
  return 2.0 / (1.0 + std::sin(std::numbers::pi / n));
}

/// Successive over-relaxation until the largest per-node update drops below tol.
/// Free nodes keep their current values as the initial guess.
inline SolveResult solve_laplace(PotentialGrid grid, const SolveOptions& opt = {}) {
  const int nx = grid.nx(), ny = grid.ny(), nz = grid.nz();
  std::size_t free_count = 0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const bool face = i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1;
        const bool free = grid.is_free(grid.index(i, j, k));
        if (face && free) throw InvalidArgument("grid boundary nodes must all be fixed");
        free_count += free;
      }
  if (free_count == 0) throw InvalidArgument("grid has no free nodes");

  const double tol = opt.tol > 0.0 ? opt.tol : default_tolerance(grid);
  const double w = opt.omega > 0.0 ? opt.omega : optimal_sor_factor(grid);
  const std::ptrdiff_t sy = nx;
  const std::ptrdiff_t sz = static_cast<std::ptrdiff_t>(nx) * ny;
  double* v = grid.values().data();
  const std::int32_t* m = grid.mask().data();

  auto relax_row = [&](int j, int k, int i0, int step, double& max_delta) {
    std::size_t idx = grid.index(i0, j, k);
    for (int i = i0; i < nx - 1; i += step, idx += step) {
      if (m[idx] != PotentialGrid::kFree) continue;
      const double nb = v[idx - 1] + v[idx + 1] + v[idx - sy] + v[idx + sy] + v[idx - sz] + v[idx + sz];
      const double delta = w * (nb / 6.0 - v[idx]);
      v[idx] += delta;
      max_delta = std::max(max_delta, std::abs(delta));
    }
  };

  SolveResult out;
  double max_delta = 0.0;
  for (long sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    max_delta = 0.0;
    if (opt.order == SweepOrder::red_black) {
      for (int color = 0; color < 2; ++color)
        for (int k = 1; k < nz - 1; ++k)
          for (int j = 1; j < ny - 1; ++j) relax_row(j, k, 1 + ((1 + j + k + color) & 1), 2, max_delta);
    } else {
      for (int k = 1; k < nz - 1; ++k)
        for (int j = 1; j < ny - 1; ++j) relax_row(j, k, 1, 1, max_delta);
    }
    if (max_delta < tol) {
      out.sweeps = sweep;
      out.last_update = max_delta;
      out.grid = std::move(grid);
      return out;
    }
  }
  std::ostringstream os;
  os << "Laplace solve did not converge in " << opt.max_sweeps << " sweeps (last update " << max_delta << " V)";
  throw NonConvergence(os.str(), max_delta, opt.max_sweeps);
}

/// Unit-voltage solutions for groups of electrodes sharing one rasterization.
/// Any voltage assignment constant over each group is the weighted sum.
class ElectrodeBasis {
 public:
  struct Group {
    std::string name;
    std::vector<std::string> labels;
  };

  ElectrodeBasis(const ElectrodeList& electrodes, std::vector<Group> groups, const Box& domain, double h,
                 SolveOptions opt = {})
      : groups_(std::move(groups)) {
    ElectrodeList zeroed = electrodes;
    for (auto& e : zeroed) e.voltage = 0.0;
    layout_ = std::make_shared<const PotentialGrid>(rasterize(zeroed, domain, h));
    if (opt.tol <= 0.0) opt.tol = 1e-6;
    for (const auto& grp : groups_) {
      std::vector<double> volts(layout_->labels().size(), 0.0);
      for (const auto& label : grp.labels) volts.at(label_index(label)) = 1.0;
      unit_.push_back(std::make_shared<const PotentialGrid>(solve_laplace(layout_->with_voltages(volts), opt).grid));
    }
  }

  const std::vector<Group>& groups() const noexcept { return groups_; }
  const PotentialGrid& layout() const noexcept { return *layout_; }
  const PotentialGrid& unit(std::size_t g) const { return *unit_.at(g); }

  std::size_t label_index(const std::string& label) const {
    const auto& labels = layout_->labels();
    for (std::size_t i = 1; i < labels.size(); ++i)
      if (labels[i] == label) return i;
    throw InvalidArgument("unknown electrode label '" + label + "'");
  }

  /// Grid for per-group voltages.
  PotentialGrid combine(const std::vector<double>& group_voltages) const {
    if (group_voltages.size() != unit_.size()) throw InvalidArgument("one voltage per basis group required");
    PotentialGrid out = *layout_;
    auto& vals = out.values();
    std::fill(vals.begin(), vals.end(), 0.0);
    for (std::size_t g = 0; g < unit_.size(); ++g) {
      if (group_voltages[g] == 0.0) continue;
      const auto& u = unit_[g]->values();
      for (std::size_t n = 0; n < vals.size(); ++n) vals[n] += group_voltages[g] * u[n];
    }
    return out;
  }

 private:
  std::vector<Group> groups_;
  std::shared_ptr<const PotentialGrid> layout_;
  std::vector<std::shared_ptr<const PotentialGrid>> unit_;
};

}  // namespace penning
