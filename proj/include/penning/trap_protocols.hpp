#pragma once

// Trap builders and voltage-schedule protocols: trapping mode, ring-guide
// transport and pad-array hopping.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "penning/analytic_fields.hpp"
#include "penning/dynamics.hpp"
#include "penning/geometry.hpp"
#include "penning/grid_solver.hpp"

namespace penning {

/// Electrode label -> voltage. Labels not listed are at 0 V.
using Assignment = std::map<std::string, double>;

inline ElectrodeList apply_assignment(ElectrodeList electrodes, const Assignment& assignment) {
  for (auto& e : electrodes) e.voltage = 0.0;
  for (const auto& [label, volts] : assignment) {
    auto it = std::find_if(electrodes.begin(), electrodes.end(), [&](const auto& e) { return e.label == label; });
    if (it == electrodes.end()) throw InvalidArgument("assignment names unknown electrode '" + label + "'");
    if (!std::isfinite(volts)) throw InvalidArgument("non-finite voltage for '" + label + "'");
    for (; it != electrodes.end(); ++it)
      if (it->label == label) it->voltage = volts;
  }
  return electrodes;
}

/// Box around the electrodes with `margin` of free space on every side.
inline Box padded_domain(const ElectrodeList& electrodes, double margin) { return bounds_of(electrodes).grown(margin); }

// ---------------------------------------------------------------- six-wire

inline LogWireSet build_six_wire(const SixWireSpec& spec) { return make_six_wire(spec); }

// ---------------------------------------------------------------- two-plate

inline ElectrodeList build_two_plate(double z0, double R, double r, double v_top, double v_bottom,
                                     double thickness = 0.5 * constants::mm) {
  if (!(z0 > 0.0)) throw InvalidArgument("plate separation must be positive");
  if (!(r > 0.0 && r < R)) throw InvalidArgument("two-plate radii need 0 < r < R");
  if (!(thickness > 0.0 && thickness < z0)) throw InvalidArgument("plate thickness must be in (0, z0)");
  return {{Disk{{0, 0, -0.5 * thickness}, R, thickness, Axis::z}, v_bottom, "bottom"},
          {Annulus{{0, 0, z0 + 0.5 * thickness}, r, R, thickness, Axis::z}, v_top, "top"}};
}

// ---------------------------------------------------------------- ring guide

struct RingTransportSpec {
  std::array<double, 3> ring_radii{3 * constants::mm, 4.5 * constants::mm, 6 * constants::mm};
  double wire_radius = 0.25 * constants::mm;
  double z_gap = 2 * constants::mm;
};

/// Three coaxial rings in the plane z = +z_gap/2 crossed by three straight
/// rods along x in the plane z = -z_gap/2, spaced like the rings.
inline ElectrodeList build_ring_transport(const std::array<double, 3>& ring_radii, double wire_radius, double z_gap) {
  if (!(wire_radius > 0.0)) throw InvalidArgument("wire radius must be positive");
  if (!(z_gap > 2.0 * wire_radius)) throw GeometryConflict("ring and rod layers overlap");
  if (!(ring_radii[0] > wire_radius && ring_radii[0] < ring_radii[1] && ring_radii[1] < ring_radii[2]))
    throw InvalidArgument("ring radii must be strictly increasing");
  for (int k = 0; k < 2; ++k)
    if (ring_radii[k + 1] - ring_radii[k] <= 2.0 * wire_radius) throw GeometryConflict("adjacent rings touch");
  const double half_len = ring_radii[2] + 2.0 * (ring_radii[2] - ring_radii[1]);
  const double y0 = ring_radii[1];
  const double pitch = ring_radii[2] - ring_radii[1];
  const std::array<double, 3> rod_y{y0 - pitch, y0, y0 + pitch};
  if (rod_y[1] - rod_y[0] <= 2.0 * wire_radius) throw GeometryConflict("adjacent rods touch");
  ElectrodeList out;
  const std::array<const char*, 3> ring_names{"ring_inner", "ring_middle", "ring_outer"};
  const std::array<const char*, 3> rod_names{"rod_inner", "rod_middle", "rod_outer"};
  for (int k = 0; k < 3; ++k)
    out.push_back({Torus{{0, 0, 0.5 * z_gap}, ring_radii[k], wire_radius, Axis::z}, 0.0, ring_names[k]});
  for (int k = 0; k < 3; ++k)
    out.push_back({Rod{{-half_len, rod_y[k], -0.5 * z_gap}, {half_len, rod_y[k], -0.5 * z_gap}, wire_radius}, 0.0,
                   rod_names[k]});
  return out;
}

inline ElectrodeList build_ring_transport(const RingTransportSpec& spec) {
  return build_ring_transport(spec.ring_radii, spec.wire_radius, spec.z_gap);
}

/// Trap mode: outer wires of both sets at v_outer, the central ones at v_center.
inline Assignment ring_trap_assignment(double v_outer = -5.0, double v_center = 5.0) {
  return {{"ring_inner", v_outer}, {"ring_middle", v_center}, {"ring_outer", v_outer},
          {"rod_inner", v_outer},  {"rod_middle", v_center},  {"rod_outer", v_outer}};
}

/// Transport mode: rods switched to the given voltages, rings kept in trap mode.
inline Assignment ring_transport_assignment(std::array<double, 3> rod_volts = {-3.0, 0.0, 5.0}, double v_outer = -5.0,
                                            double v_center = 5.0) {
  Assignment a = ring_trap_assignment(v_outer, v_center);
  a["rod_inner"] = rod_volts[0];
  a["rod_middle"] = rod_volts[1];
  a["rod_outer"] = rod_volts[2];
  return a;
}

// ---------------------------------------------------------------- pad array

struct Site {
  int i = 0;
  int j = 0;
  auto operator<=>(const Site&) const = default;
};

inline std::string to_string(const Site& s) { return std::to_string(s.i) + "," + std::to_string(s.j); }

struct PadArraySpec {
  double pad_diameter = 4 * constants::mm;
  double pad_pitch = 5 * constants::mm;
  double gamma = 0.9;
  double endcap_hole_diameter = 1 * constants::mm;
  std::vector<Site> trap_sites{{0, 0}};
  double trap_center_spacing = std::numbers::sqrt3 * 5 * constants::mm;
  double pad_thickness = 0.5 * constants::mm;

  /// Adjacent sites share two ring pads.
  static PadArraySpec shared_pads(double pitch = 5 * constants::mm) {
    PadArraySpec s;
    s.pad_diameter = 0.8 * pitch;
    s.pad_pitch = pitch;
    s.endcap_hole_diameter = 0.2 * pitch;
    s.trap_center_spacing = std::numbers::sqrt3 * pitch;
    return s;
  }
  /// Shared-pad tiling scaled so adjacent sites are `spacing` apart (5 mm hop example).
  static PadArraySpec hop_example(double spacing = 5 * constants::mm) {
    return shared_pads(spacing / std::numbers::sqrt3);
  }

  double layer_separation() const { return gamma * pad_pitch; }

  void validate() const {
    if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
    if (!(pad_diameter > 0.0 && pad_pitch > 0.0 && pad_thickness > 0.0)) throw InvalidArgument("pad sizes must be positive");
    if (!(endcap_hole_diameter > 0.0 && endcap_hole_diameter < pad_diameter))
      throw InvalidArgument("endcap hole must be smaller than the pad");
    if (!(pad_diameter < pad_pitch)) throw GeometryConflict("pads overlap at the given pitch");
    if (!(trap_center_spacing > 0.0)) throw InvalidArgument("trap centre spacing must be positive");
    if (trap_sites.empty()) throw InvalidArgument("pad array needs at least one site");
  }

  Vec3 site_center(const Site& s) const {
    return {trap_center_spacing * (s.i + 0.5 * s.j), trap_center_spacing * 0.5 * std::numbers::sqrt3 * s.j, 0.0};
  }
};

struct SitePads {
  Site site;
  Vec3 center;
  std::array<std::string, 2> endcaps;
  std::array<std::string, 12> ring;
};

/// One pad location; the electrodes are "top_<name>" and "bottom_<name>".
struct PadPosition {
  std::string name;
  Vec3 xy;
  bool endcap = false;
};

struct PadLayout {
  ElectrodeList electrodes;
  std::vector<SitePads> sites;
  std::vector<PadPosition> pads;

  const SitePads& at(const Site& s) const {
    for (const auto& sp : sites)
      if (sp.site == s) return sp;
    throw InvalidArgument("site " + to_string(s) + " is not part of the array");
  }
};

/// Two pad planes with inner faces at z = ±gamma·pitch/2. Each site has an
/// endcap pad with a hole plus six ring pads at 30°+60°k on radius pitch,
/// in both planes. Coincident pads of neighbouring sites are merged.
inline PadLayout build_pad_array(const PadArraySpec& spec) {
  spec.validate();
  const double z_face = 0.5 * spec.layer_separation();
  const double zc = z_face + 0.5 * spec.pad_thickness;
  const double tol = 1e-9 * spec.pad_pitch;

  PadLayout out;
  auto& pads = out.pads;
  auto place = [&](const Vec3& xy, bool endcap, const std::string& name) -> std::string {
    for (const auto& p : pads) {
      const double d = norm(p.xy - xy);
      if (d < tol) {
        if (p.endcap || endcap) throw GeometryConflict("pad '" + name + "' coincides with pad '" + p.name + "'");
        return p.name;
      }
      if (d < spec.pad_diameter) throw GeometryConflict("pad '" + name + "' overlaps pad '" + p.name + "'");
    }
    pads.push_back({name, xy, endcap});
    return name;
  };

  for (std::size_t n = 0; n < spec.trap_sites.size(); ++n) {
    const Site& site = spec.trap_sites[n];
    for (std::size_t m = 0; m < n; ++m)
      if (spec.trap_sites[m] == site) throw GeometryConflict("site " + to_string(site) + " listed twice");
    SitePads sp{site, spec.site_center(site), {}, {}};
    const std::string tag = "s" + std::to_string(n);
    const std::string cap = place(sp.center, true, "cap_" + tag);
    std::array<std::string, 6> ring_names;
    for (int k = 0; k < 6; ++k) {
      const double ang = (30.0 + 60.0 * k) * std::numbers::pi / 180.0;
      const Vec3 xy = sp.center + spec.pad_pitch * Vec3{std::cos(ang), std::sin(ang), 0.0};
      ring_names[k] = place(xy, false, "ring_" + tag + "_p" + std::to_string(k));
    }
    sp.endcaps = {"top_" + cap, "bottom_" + cap};
    for (int k = 0; k < 6; ++k) {
      sp.ring[k] = "top_" + ring_names[k];
      sp.ring[6 + k] = "bottom_" + ring_names[k];
    }
    out.sites.push_back(sp);
  }

  for (const char* plane : {"top", "bottom"}) {
    const double z = plane[0] == 't' ? zc : -zc;
    for (const auto& p : pads) {
      const Vec3 c{p.xy.x, p.xy.y, z};
      const std::string label = std::string(plane) + "_" + p.name;
      if (p.endcap)
        out.electrodes.push_back(
            {Annulus{c, 0.5 * spec.endcap_hole_diameter, 0.5 * spec.pad_diameter, spec.pad_thickness, Axis::z}, 0.0,
             label});
      else
        out.electrodes.push_back({Disk{c, 0.5 * spec.pad_diameter, spec.pad_thickness, Axis::z}, 0.0, label});
    }
  }
  return out;
}

/// Grid domain around a pad layout with `margin` of free space, symmetric
/// about the midpoint of the sites so that z = 0 and the array centre are nodes.
inline Box pad_domain(const PadLayout& layout, double margin, double h) {
  Vec3 c;
  for (const auto& s : layout.sites) c += s.center;
  c = (1.0 / layout.sites.size()) * c;
  return centered_domain(bounds_of(layout.electrodes), margin, h, c);
}

struct TrapAssignment {
  Assignment voltages;
  std::optional<std::string> warning;
};

inline TrapAssignment trapping_assignment(const PadLayout& layout, const Site& site, double v_endcap = 10.0,
                                          double v_ring = -10.0) {
  const SitePads& sp = layout.at(site);
  TrapAssignment out;
  for (const auto& l : sp.endcaps) out.voltages[l] = v_endcap;
  for (const auto& l : sp.ring) out.voltages[l] = v_ring;
  if (!(v_endcap * v_ring < 0.0))
    out.warning = "endcap and ring voltages do not have opposite signs; the site will not confine axially";
  return out;
}

// ---------------------------------------------------------------- schedules

struct ScheduleSegment {
  double t_start = 0.0;
  Assignment assignment;
};

struct VoltageSchedule {
  std::vector<ScheduleSegment> segments;

  void validate(const ElectrodeList& electrodes) const {
    if (segments.empty()) throw InvalidArgument("schedule has no segments");
    for (std::size_t n = 0; n < segments.size(); ++n) {
      if (!std::isfinite(segments[n].t_start)) throw InvalidArgument("schedule start time must be finite");
      if (n > 0 && !(segments[n].t_start > segments[n - 1].t_start))
        throw InvalidArgument("schedule start times must be strictly increasing");
      apply_assignment(electrodes, segments[n].assignment);
    }
  }
};

/// Immutable solved grids keyed by assignment; safe for concurrent readers.
class GridCache {
 public:
  GridCache(ElectrodeList electrodes, Box domain, double h, SolveOptions opt = {})
      : electrodes_(std::move(electrodes)), domain_(domain), h_(h), opt_(opt) {}

  std::shared_ptr<const PotentialGrid> get(const Assignment& a) const {
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(a); it != cache_.end()) return it->second;
    }
    auto grid = std::make_shared<const PotentialGrid>(
        solve_laplace(rasterize(apply_assignment(electrodes_, a), domain_, h_), opt_).grid);
    std::lock_guard lock(mu_);
    return cache_.emplace(a, std::move(grid)).first->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

 private:
  ElectrodeList electrodes_;
  Box domain_;
  double h_;
  SolveOptions opt_;
  mutable std::mutex mu_;
  mutable std::map<Assignment, std::shared_ptr<const PotentialGrid>> cache_;
};

/// Field stack that follows a schedule: segment n is active on [t_n, t_{n+1}).
inline FieldStack schedule_fields(const VoltageSchedule& schedule, const GridCache& cache, Vec3 b) {
  FieldStack stack(b);
  for (std::size_t n = 0; n < schedule.segments.size(); ++n) {
    TimeWindow w;
    if (n > 0) w.begin = schedule.segments[n].t_start;
    if (n + 1 < schedule.segments.size()) w.end = schedule.segments[n + 1].t_start;
    stack.add(GridField(cache.get(schedule.segments[n].assignment)), w);
  }
  return stack;
}

// ---------------------------------------------------------------- pad model

struct PadGridOptions {
  double h = 0.2 * constants::mm;
  double margin = 4 * constants::mm;
  SolveOptions solve{};
};

/// A pad array on a fixed grid with one unit solution per pad location (top
/// and bottom pad tied). Assignments that are mirror-symmetric in z are
/// superpositions; others are solved directly. Results are cached.
class PadArrayModel {
 public:
  explicit PadArrayModel(PadArraySpec spec, PadGridOptions opt = {})
      : spec_(std::move(spec)), opt_(opt), layout_(build_pad_array(spec_)),
        domain_(pad_domain(layout_, opt.margin, opt.h)) {
    std::vector<ElectrodeBasis::Group> groups;
    for (const auto& p : layout_.pads) groups.push_back({p.name, {"top_" + p.name, "bottom_" + p.name}});
    basis_ = std::make_shared<const ElectrodeBasis>(layout_.electrodes, std::move(groups), domain_, opt.h, opt.solve);
  }

  const PadArraySpec& spec() const noexcept { return spec_; }
  const PadLayout& layout() const noexcept { return layout_; }
  const Box& domain() const noexcept { return domain_; }
  double spacing() const noexcept { return opt_.h; }
  const ElectrodeBasis& basis() const noexcept { return *basis_; }

  std::shared_ptr<const PotentialGrid> grid(const Assignment& a) const {
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(a); it != cache_.end()) return it->second;
    }
    const ElectrodeList electrodes = apply_assignment(layout_.electrodes, a);
    auto volts = [&](const std::string& label) {
      auto it = a.find(label);
      return it == a.end() ? 0.0 : it->second;
    };
    std::vector<double> per_pad;
    bool symmetric = true;
    for (const auto& p : layout_.pads) {
      const double top = volts("top_" + p.name);
      symmetric = symmetric && top == volts("bottom_" + p.name);
      per_pad.push_back(top);
    }
    std::shared_ptr<const PotentialGrid> g;
    if (symmetric) {
      g = std::make_shared<const PotentialGrid>(basis_->combine(per_pad));
    } else {
      SolveOptions o = opt_.solve;
      g = std::make_shared<const PotentialGrid>(solve_laplace(rasterize(electrodes, domain_, opt_.h), o).grid);
    }
    std::lock_guard lock(mu_);
    return cache_.emplace(a, std::move(g)).first->second;
  }

 private:
  PadArraySpec spec_;
  PadGridOptions opt_;
  PadLayout layout_;
  Box domain_;
  std::shared_ptr<const ElectrodeBasis> basis_;
  mutable std::mutex mu_;
  mutable std::map<Assignment, std::shared_ptr<const PotentialGrid>> cache_;
};

/// Second difference of the potential along z at r, step = grid spacing.
inline double axial_curvature(const PotentialGrid& g, const Vec3& r) {
  const double h = g.spacing();
  const Vec3 dz{0, 0, h};
  return (g.potential(r + dz) - 2.0 * g.potential(r) + g.potential(r - dz)) / (h * h);
}

/// Trap voltages ±v that give an axial frequency of omega_z at a site centre.
inline double trap_voltage_for(const PadArrayModel& model, const Site& site, const Species& s, double omega_z) {
  const auto unit = model.grid(trapping_assignment(model.layout(), site, 1.0, -1.0).voltages);
  const double k1 = axial_curvature(*unit, model.layout().at(site).center);
  if (!(s.charge() * k1 > 0.0)) throw NoAxialConfinement("unit trapping assignment does not confine this charge");
  return omega_z * omega_z / (s.charge_to_mass() * k1);
}

// ---------------------------------------------------------------- hopping

struct HopOptions {
  int loop_points = 64;
  int segment_points = 33;
  /// Lower bound on sign(q)·d2Phi/dz2 along the channel; 0 selects the value
  /// giving omega_z = omega_c/4, a quarter axial oscillation per hop.
  double curvature_floor = 0.0;
  double scale_window = 0.5;
  int steps_per_period = 1000;
  /// Trap voltage magnitude before and after the hop; 0 selects omega_z = omega_c/2.
  double trap_voltage = 0.0;
};

struct HopPlan {
  Site from_site;
  Site to_site;
  double duration = 0.0;
  Assignment hop_assignment;
  Vec3 expected_landing;
  Vec3 start;
  Vec3 b_field;
  Vec3 target_field;
  double voltage_scale = 1.0;
  double curvature_floor = 0.0;
  double trap_voltage = 0.0;
  std::vector<Vec3> channel;
};

namespace detail {

inline Vec3 mirror_across(const Vec3& p, const Vec3& mid, const Vec3& n) { return p - (2.0 * dot(p - mid, n)) * n; }

/// min ½uᵀHu − gᵀu subject to C u >= d, by coordinate ascent on the dual.
inline Eigen::VectorXd solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::MatrixXd& C,
                                const Eigen::VectorXd& d, int& worst_row, double& worst_violation) {
  const Eigen::LLT<Eigen::MatrixXd> llt(H);
  Eigen::VectorXd u = llt.solve(g);
  const Eigen::MatrixXd Z = llt.solve(C.transpose());
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(C.rows());
  const double scale = std::max(d.cwiseAbs().maxCoeff(), 1e-300);
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
      const double mii = C.row(i).dot(Z.col(i));
      if (!(mii > 0.0)) continue;
      const double r = C.row(i).dot(u) - d(i);
      const double step = std::max(-lambda(i), -r / mii);
      if (step == 0.0) continue;
      lambda(i) += step;
      u += step * Z.col(i);
      change = std::max(change, std::abs(step) * std::sqrt(mii));
    }
    if (change < 1e-13 * scale) break;
  }
  const Eigen::VectorXd slack = C * u - d;
  worst_row = -1;
  worst_violation = 0.0;
  for (Eigen::Index i = 0; i < slack.size(); ++i)
    if (-slack(i) > worst_violation) worst_violation = -slack(i), worst_row = static_cast<int>(i);
  return u;
}

}  // namespace detail

inline TrajectoryState at_rest(const Vec3& r) { return {0.0, r, {}}; }

/// Plans a one-period hop between adjacent sites along the lattice x-axis.
/// Pad voltages come from a least-squares fit of the field to the uniform
/// drift field over the cycloid channel, with pads mirror-tied across the
/// perpendicular bisector and a floor on the axial curvature along the
/// channel; a final scale factor minimises the landing error after one period.
inline HopPlan plan_hop(const PadArrayModel& model, const Site& from, const Site& to, const Species& s, double B,
                        const HopOptions& opt = {}) {
  if (!(B > 0.0)) throw InvalidArgument("magnetic field must be positive");
  if (to.j != from.j || std::abs(to.i - from.i) != 1)
    throw InvalidArgument("hop sites must be adjacent along the lattice x-axis");
  const PadLayout& layout = model.layout();
  const Vec3 a = layout.at(from).center, b = layout.at(to).center;
  const Vec3 disp = b - a;
  const double dist = norm(disp);
  const Vec3 ex = (1.0 / dist) * disp;
  const Vec3 bvec{0, 0, B};
  const Vec3 ey = cross(Vec3{0, 0, 1}, ex);

  HopPlan plan;
  plan.from_site = from;
  plan.to_site = to;
  plan.duration = cyclotron_period(s, B);
  plan.expected_landing = b;
  plan.start = a;
  plan.b_field = bvec;
  const double emag = hop_field_magnitude(dist, B, s);
  plan.target_field = emag * ey;
  const double wc = cyclotron_frequency(s, B);
  plan.curvature_floor = opt.curvature_floor > 0.0 ? opt.curvature_floor : 0.0625 * wc * wc / std::abs(s.charge_to_mass());
  plan.trap_voltage = opt.trap_voltage > 0.0 ? opt.trap_voltage : trap_voltage_for(model, to, s, 0.5 * wc);

  for (int k = 0; k < opt.loop_points; ++k) {
    const double t = plan.duration * (k + 0.5) / opt.loop_points;
    const PlanarPoint p = cycloid_closed_form(t, emag, B, s);
    plan.channel.push_back(a + p.x * ex + p.y * ey);
  }
  for (int k = 0; k < opt.segment_points; ++k) plan.channel.push_back(a + (static_cast<double>(k) / (opt.segment_points - 1)) * disp);

  // Mirror classes of pad locations.
  const Vec3 mid = 0.5 * (a + b);
  const double tol = 1e-6 * model.spec().pad_pitch;
  std::vector<int> cls(layout.pads.size(), -1);
  int n_cls = 0;
  for (std::size_t p = 0; p < layout.pads.size(); ++p) {
    if (cls[p] >= 0) continue;
    cls[p] = n_cls;
    const Vec3 m = detail::mirror_across(layout.pads[p].xy, mid, ex);
    for (std::size_t q = p + 1; q < layout.pads.size(); ++q)
      if (cls[q] < 0 && norm(layout.pads[q].xy - m) < tol) cls[q] = n_cls;
    ++n_cls;
  }

  const auto& basis = model.basis();
  const std::size_t K = plan.channel.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * K, n_cls), C = Eigen::MatrixXd::Zero(K, n_cls);
  Eigen::VectorXd rhs(2 * K), floor = Eigen::VectorXd::Constant(K, plan.curvature_floor);
  const double sign = s.charge() > 0.0 ? 1.0 : -1.0;
  for (std::size_t k = 0; k < K; ++k) {
    rhs(2 * k) = dot(plan.target_field, ex);
    rhs(2 * k + 1) = dot(plan.target_field, ey);
    for (std::size_t p = 0; p < layout.pads.size(); ++p) {
      const PotentialGrid& u = basis.unit(p);
      const Vec3 e = u.efield(plan.channel[k]);
      A(2 * k, cls[p]) += dot(e, ex);
      A(2 * k + 1, cls[p]) += dot(e, ey);
      C(k, cls[p]) += sign * axial_curvature(u, plan.channel[k]);
    }
  }
  Eigen::MatrixXd H = A.transpose() * A;
  H.diagonal().array() += 1e-9 * H.diagonal().maxCoeff();
  const Eigen::VectorXd g = A.transpose() * rhs;
  int worst = -1;
  double violation = 0.0;
  const Eigen::VectorXd u = detail::solve_qp(H, g, C, floor, worst, violation);
  if (worst >= 0 && violation > 1e-6 * plan.curvature_floor) {
    std::ostringstream os;
    os << "axial confinement floor cannot be met along the hop channel (short by " << violation << " V/m^2)";
    throw PlanInfeasible(os.str(), plan.channel[worst]);
  }

  Assignment unit_plan;
  for (std::size_t p = 0; p < layout.pads.size(); ++p) {
    unit_plan["top_" + layout.pads[p].name] = u(cls[p]);
    unit_plan["bottom_" + layout.pads[p].name] = u(cls[p]);
  }
  const auto unit_grid = model.grid(unit_plan);

  const double dt = plan.duration / opt.steps_per_period;
  auto landing_error = [&](double scale) {
    Superposition f;
    f.add(GridField(unit_grid), scale);
    FieldStack stack(bvec);
    stack.add(f);
    const auto res = integrate(at_rest(a), stack, {dt, plan.duration, opt.steps_per_period}, s);
    if (res.escaped()) return std::numeric_limits<double>::infinity();
    const Vec3 d = res.final_state.r - b;
    return std::hypot(d.x, d.y);
  };
  // Golden-section search on the overall voltage scale.
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 1.0 - opt.scale_window, hi = 1.0 + opt.scale_window;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = landing_error(x1), f2 = landing_error(x2);
  for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
    if (f1 <= f2) {
      hi = x2, x2 = x1, f2 = f1;
      x1 = hi - phi * (hi - lo), f1 = landing_error(x1);
    } else {
      lo = x1, x1 = x2, f1 = f2;
      x2 = lo + phi * (hi - lo), f2 = landing_error(x2);
    }
  }
  plan.voltage_scale = f1 <= f2 ? x1 : x2;
  for (const auto& [label, v] : unit_plan) plan.hop_assignment[label] = plan.voltage_scale * v;
  return plan;
}

struct HopReport {
  IntegrationResult result;
  TrajectoryState landing;
  double dxy = 0.0;
  double z_final = 0.0;
  double v_final = 0.0;
  double max_abs_z = 0.0;
  /// Velocity across the hop axis where the ion crosses the perpendicular bisector.
  std::optional<double> midpoint_transverse_velocity;
  bool failed = false;
  std::string message;
};

/// Runs a hop: trapping at the start site before t = 0, the hop assignment
/// on [0, duration), trapping at the target site afterwards. `hold` extends
/// the run past the landing.
inline HopReport execute_hop(const PadArrayModel& model, const HopPlan& plan, const TrajectoryState& state0,
                             const Species& s, double hold = 0.0, double duration = 0.0, int steps_per_period = 1000) {
  const double T = duration > 0.0 ? duration : plan.duration;
  const double t0 = state0.t;
  FieldStack stack(plan.b_field);
  const auto trap_from = model.grid(trapping_assignment(model.layout(), plan.from_site, plan.trap_voltage, -plan.trap_voltage).voltages);
  const auto trap_to = model.grid(trapping_assignment(model.layout(), plan.to_site, plan.trap_voltage, -plan.trap_voltage).voltages);
  stack.add(GridField(trap_from), {-std::numeric_limits<double>::infinity(), t0});
  stack.add(GridField(model.grid(plan.hop_assignment)), {t0, t0 + T});
  stack.add(GridField(trap_to), {t0 + T, std::numeric_limits<double>::infinity()});

  const double dt = plan.duration / steps_per_period;
  HopReport rep;
  rep.result = integrate(state0, stack, {dt, t0 + T + hold, 1}, s);
  const auto& samples = rep.result.samples;
  const Vec3 ex = (1.0 / norm(plan.expected_landing - plan.start)) * (plan.expected_landing - plan.start);
  const Vec3 ey = cross(Vec3{0, 0, 1}, ex);
  const Vec3 mid = 0.5 * (plan.start + plan.expected_landing);
  std::size_t landing = 0;
  for (std::size_t k = 0; k < samples.size() && samples[k].t <= t0 + T + 0.5 * dt; ++k) {
    landing = k;
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(samples[k].r.z));
    if (k > 0 && !rep.midpoint_transverse_velocity) {
      const double s0 = dot(samples[k - 1].r - mid, ex), s1 = dot(samples[k].r - mid, ex);
      if (s0 < 0.0 && s1 >= 0.0) {
        const double w = -s0 / (s1 - s0);
        rep.midpoint_transverse_velocity = dot((1.0 - w) * samples[k - 1].v + w * samples[k].v, ey);
      }
    }
  }
  rep.landing = samples[landing];
  const Vec3 d = rep.landing.r - plan.expected_landing;
  rep.dxy = std::hypot(d.x, d.y);
  rep.z_final = std::abs(rep.landing.r.z);
  rep.v_final = norm(rep.landing.v);
  if (rep.result.escaped()) {
    rep.failed = true;
    rep.message = std::string("hop failed: ") + to_string(rep.result.termination) + " at t=" +
                  std::to_string(rep.result.final_state.t);
  }
  return rep;
}

}  // namespace penning
