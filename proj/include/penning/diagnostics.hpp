#pragma once

// Analysis operations: spectra, quadrupole deviation, gamma optimisation,
// resonance bias prediction and potential profiles.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <type_traits>
#include <vector>

#include <fftw3.h>

#include "penning/analytic_fields.hpp"
#include "penning/dynamics.hpp"
#include "penning/field.hpp"
#include "penning/grid_solver.hpp"
#include "penning/trap_protocols.hpp"

namespace penning {

/// Applies f to every item on up to `workers` threads; results keep input order.
template <class T, class F>
auto parallel_map(const std::vector<T>& items, F f, unsigned workers = 0) {
  using R = std::invoke_result_t<F, const T&>;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<R> out;
  out.reserve(items.size());
  if (workers == 1 || items.size() < 2) {
    for (const auto& it : items) out.push_back(f(it));
    return out;
  }
  std::vector<std::optional<R>> slots(items.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex fail_mu;
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < items.size();) {
      try {
        slots[k].emplace(f(items[k]));
      } catch (...) {
        std::lock_guard lock(fail_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < std::min<std::size_t>(workers, items.size()); ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------- spectra

enum class Component { x, y, z };

inline double component(const Vec3& r, Component c) {
  switch (c) {
    case Component::x: return r.x;
    case Component::y: return r.y;
    default: return r.z;
  }
}

struct SpectrumPeak {
  double frequency = 0.0;
  double amplitude = 0.0;
  double bin_width = 0.0;
};

struct Spectrum {
  double bin_width = 0.0;
  std::vector<double> power;  // one-sided |X_k|^2 of the windowed, mean-free signal
  double window_power = 0.0;  // mean of w^2
};

inline Spectrum power_spectrum(const std::vector<double>& x, double dt) {
  const std::size_t n = x.size();
  if (n < 1024) throw TooShort("spectrum needs at least 1024 samples, got " + std::to_string(n));
  if (!(dt > 0.0)) throw InvalidArgument("sample interval must be positive");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  std::vector<double> in(n);
  double wsum2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 0.5 - 0.5 * std::cos(constants::two_pi * k / n);
    in[k] = (x[k] - mean) * w;
    wsum2 += w * w;
  }
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                        FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  Spectrum s;
  s.bin_width = 1.0 / (n * dt);
  s.window_power = wsum2 / n;
  s.power.resize(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) s.power[k] = std::norm(out[k]);
  return s;
}

/// Time-domain variance recovered from a power spectrum (Parseval).
inline double spectral_variance(const Spectrum& s) {
  const std::size_t n_half = s.power.size();
  const std::size_t n = 2 * (n_half - 1);
  double total = 0.0;
  for (std::size_t k = 0; k < n_half; ++k) total += (k == 0 || k == n_half - 1 ? 1.0 : 2.0) * s.power[k];
  return total / (static_cast<double>(n) * n) / s.window_power;
}

inline std::vector<double> sample_component(const Trajectory& traj, Component c, double& dt) {
  if (traj.size() < 1024) throw TooShort("spectrum needs at least 1024 samples, got " + std::to_string(traj.size()));
  dt = traj[1].t - traj[0].t;
  for (std::size_t k = 1; k < traj.size(); ++k)
    if (std::abs((traj[k].t - traj[k - 1].t) - dt) > 1e-6 * dt) throw InvalidArgument("trajectory stride is not uniform");
  std::vector<double> x(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) x[k] = component(traj[k].r, c);
  return x;
}

/// Local maxima of a Hann-windowed spectrum, refined by a parabola through the
/// log power of the three bins around each maximum, strongest first.
inline std::vector<SpectrumPeak> spectrum_peaks(const std::vector<double>& x, double dt, std::size_t max_peaks = 8) {
  const Spectrum s = power_spectrum(x, dt);
  const std::size_t n = x.size();
  const double top = *std::max_element(s.power.begin(), s.power.end());
  std::vector<SpectrumPeak> peaks;
  if (!(top > 0.0)) return peaks;
  for (std::size_t k = 1; k + 1 < s.power.size(); ++k) {
    const double a = s.power[k - 1], b = s.power[k], c = s.power[k + 1];
    if (!(b > a && b >= c) || b < 1e-12 * top) continue;
    const double la = std::log(a), lb = std::log(b), lc = std::log(c);
    const double den = la - 2.0 * lb + lc;
    const double off = den < 0.0 ? std::clamp(0.5 * (la - lc) / den, -0.5, 0.5) : 0.0;
    const double peak_power = std::exp(lb - 0.25 * (la - lc) * off);
    // Hann coherent gain is 1/2: a sine of amplitude A gives |X| = A n / 4.
    peaks.push_back({(k + off) * s.bin_width, 4.0 * std::sqrt(peak_power) / n, s.bin_width});
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const auto& p, const auto& q) { return p.amplitude > q.amplitude; });
  if (peaks.size() > max_peaks) peaks.resize(max_peaks);
  return peaks;
}

inline std::vector<SpectrumPeak> extract_frequencies(const Trajectory& traj, Component axis, std::size_t max_peaks = 8) {
  double dt = 0.0;
  const auto x = sample_component(traj, axis, dt);
  return spectrum_peaks(x, dt, max_peaks);
}

// ---------------------------------------------------------------- quadrupole fit

struct QuadrupoleFit {
  double c0 = 0.0;
  double c_quad = 0.0;
  double residual_rms_rel = 0.0;
};

/// Halton points (bases 2, 3, 5) inside the unit ball, skipping the first `seed` indices.
inline std::vector<Vec3> halton_ball(std::size_t count, std::uint64_t seed = 20) {
  auto radical = [](std::uint64_t i, unsigned base) {
    double f = 1.0, r = 0.0;
    for (; i > 0; i /= base) {
      f /= base;
      r += f * static_cast<double>(i % base);
    }
    return r;
  };
  std::vector<Vec3> out;
  for (std::uint64_t i = seed + 1; out.size() < count; ++i) {
    const Vec3 p{2.0 * radical(i, 2) - 1.0, 2.0 * radical(i, 3) - 1.0, 2.0 * radical(i, 5) - 1.0};
    if (norm2(p) <= 1.0) out.push_back(p);
  }
  return out;
}

template <FieldSource F>
QuadrupoleFit quadrupole_deviation(const F& field, const Vec3& center, double probe_radius, std::size_t points = 512,
                                   std::uint64_t seed = 20) {
  if (!(probe_radius > 0.0)) throw InvalidArgument("probe radius must be positive");
  if (points < 200) throw InvalidArgument("quadrupole fit needs at least 200 probe points");
  const auto unit = halton_ball(points, seed);
  std::vector<double> phi(unit.size()), q(unit.size());
  for (std::size_t k = 0; k < unit.size(); ++k) {
    const Vec3 d = probe_radius * unit[k];
    const Vec3 r = center + d;
    if (field.classify(r) != Region::free) throw DomainError("probe sphere leaves the free region");
    phi[k] = field.potential(r);
    q[k] = d.x * d.x + d.y * d.y - 2.0 * d.z * d.z;
  }
  const double n = static_cast<double>(unit.size());
  const double mphi = std::accumulate(phi.begin(), phi.end(), 0.0) / n;
  const double mq = std::accumulate(q.begin(), q.end(), 0.0) / n;
  double sqq = 0.0, sqp = 0.0, spp = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < unit.size(); ++k) {
    sqq += (q[k] - mq) * (q[k] - mq);
    sqp += (q[k] - mq) * (phi[k] - mphi);
    spp += (phi[k] - mphi) * (phi[k] - mphi);
    scale = std::max(scale, std::abs(phi[k]));
  }
  if (!(spp > 1e-24 * n * std::max(scale * scale, 1e-300))) throw FlatField("potential is constant over the probe sphere");
  QuadrupoleFit fit;
  fit.c_quad = sqp / sqq;
  fit.c0 = mphi - fit.c_quad * mq;
  double res2 = 0.0, dev2 = 0.0;
  for (std::size_t k = 0; k < unit.size(); ++k) {
    const double r = phi[k] - fit.c0 - fit.c_quad * q[k];
    res2 += r * r;
    dev2 += (phi[k] - fit.c0) * (phi[k] - fit.c0);
  }
  fit.residual_rms_rel = dev2 > 0.0 ? std::sqrt(res2 / dev2) : 0.0;
  return fit;
}

// ---------------------------------------------------------------- gamma scan

struct GammaScan {
  double gamma_star = 0.0;
  std::vector<std::pair<double, double>> curve;  // (gamma, residual_rms_rel)
  bool single_trough = true;
};

/// Quadrupole deviation of a single pad site, freshly solved, with ±v trapping voltages.
inline QuadrupoleFit pad_site_deviation(PadArraySpec spec, const PadGridOptions& grid, double probe_fraction = 0.2,
                                        double v = 10.0) {
  spec.trap_sites = {spec.trap_sites.empty() ? Site{} : spec.trap_sites.front()};
  const PadLayout layout = build_pad_array(spec);
  const Site site = spec.trap_sites.front();
  const auto a = trapping_assignment(layout, site, v, -v);
  PotentialGrid g = rasterize(apply_assignment(layout.electrodes, a.voltages), pad_domain(layout, grid.margin, grid.h), grid.h);
  GridField f(solve_laplace(std::move(g), grid.solve).grid);
  return quadrupole_deviation(f, layout.at(site).center, probe_fraction * spec.pad_pitch);
}

/// Vertex of the parabola through three points.
inline double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double den = (x0 - x1) * (x0 - x2) * (x1 - x2);
  const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den;
  const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den;
  return a > 0.0 ? -b / (2.0 * a) : x1;
}

inline GammaScan optimize_gamma(const PadArraySpec& spec, double gamma_lo, double gamma_hi, int steps,
                                const PadGridOptions& grid = {}, double probe_fraction = 0.2, double v = 10.0) {
  if (!(gamma_lo > 0.0 && gamma_hi >= gamma_lo)) throw InvalidArgument("gamma range must be positive and ordered");
  GammaScan out;
  if (gamma_hi == gamma_lo) {
    out.gamma_star = gamma_lo;
    PadArraySpec s = spec;
    s.gamma = gamma_lo;
    out.curve.push_back({gamma_lo, pad_site_deviation(s, grid, probe_fraction, v).residual_rms_rel});
    return out;
  }
  if (steps < 5) throw InvalidArgument("gamma scan needs at least 5 steps");
  std::vector<double> gammas;
  for (int k = 0; k < steps; ++k) gammas.push_back(gamma_lo + (gamma_hi - gamma_lo) * k / (steps - 1));
  const auto residuals = parallel_map(gammas, [&](double g) {
    PadArraySpec s = spec;
    s.gamma = g;
    try {
      return pad_site_deviation(s, grid, probe_fraction, v).residual_rms_rel;
    } catch (const NonConvergence& e) {
      std::ostringstream os;
      os << "gamma=" << g << ": " << e.what();
      throw NonConvergence(os.str(), e.last_residual(), e.sweeps());
    }
  });
  for (int k = 0; k < steps; ++k) out.curve.push_back({gammas[k], residuals[k]});
  const auto best = static_cast<int>(std::min_element(residuals.begin(), residuals.end()) - residuals.begin());
  out.gamma_star = gammas[best];
  if (best > 0 && best + 1 < steps)
    out.gamma_star = std::clamp(parabola_vertex(gammas[best - 1], residuals[best - 1], gammas[best], residuals[best],
                                                gammas[best + 1], residuals[best + 1]),
                                gammas[best - 1], gammas[best + 1]);
  int minima = 0;
  for (int k = 0; k < steps; ++k) {
    const bool left = k == 0 || residuals[k] < residuals[k - 1];
    const bool right = k + 1 == steps || residuals[k] < residuals[k + 1];
    minima += left && right;
  }
  out.single_trough = minima == 1;
  return out;
}

// ---------------------------------------------------------------- resonance bias

/// Axial frequency (Hz) of small oscillations about `center` along z, from a
/// simulated 1-D trajectory with zero-crossing timing. Returns 0 when the
/// potential does not confine the charge.
template <FieldSource F>
double simulated_axial_frequency(const F& field, const Vec3& center, const Species& s, double amplitude, int periods = 20) {
  const double qm = s.charge_to_mass();
  const double h = amplitude;
  const double curv = (field.potential(center + Vec3{0, 0, h}) - 2.0 * field.potential(center) +
                       field.potential(center - Vec3{0, 0, h})) / (h * h);
  if (!(qm * curv > 0.0)) return 0.0;
  const double t_est = constants::two_pi / std::sqrt(qm * curv);
  const double dt = t_est / 400.0;
  auto accel = [&](double z) { return qm * field.efield(center + Vec3{0, 0, z}).z; };
  double z = amplitude, v = 0.0, a = accel(z), t = 0.0;
  std::vector<double> crossings;
  const long max_steps = static_cast<long>(periods) * 4000;
  for (long k = 0; k < max_steps && static_cast<int>(crossings.size()) <= periods; ++k) {
    const double z_old = z;
    v += 0.5 * dt * a;
    z += dt * v;
    a = accel(z);
    v += 0.5 * dt * a;
    t += dt;
    if (std::abs(z) > 100.0 * amplitude) return 0.0;
    if (z_old > 0.0 && z <= 0.0) crossings.push_back(t - dt * z / (z - z_old));
  }
  if (crossings.size() < 2) return 0.0;
  return (crossings.size() - 1) / (crossings.back() - crossings.front());
}

/// Six-wire bias at which the simulated axial frequency at the trap centre
/// matches f_circuit. The bracket is scanned, then the crossing is bisected.
inline double resonance_bias(const SixWireSpec& spec, const Species& s, double f_circuit, double v_lo = -5.0,
                             double v_hi = 5.0, int scan_points = 41) {
  if (!(f_circuit > 0.0)) throw InvalidArgument("circuit frequency must be positive");
  const double amp = 0.01 * spec.z0;
  auto fz = [&](double dv) {
    SixWireSpec w = spec;
    w.delta_V = dv;
    return simulated_axial_frequency(make_six_wire(w), {}, s, amp);
  };
  std::vector<double> dvs;
  for (int k = 0; k < scan_points; ++k) dvs.push_back(v_lo + (v_hi - v_lo) * k / (scan_points - 1));
  const auto freqs = parallel_map(dvs, fz);
  std::vector<std::pair<double, double>> table;
  for (int k = 0; k < scan_points; ++k) table.push_back({dvs[k], freqs[k]});
  const double tol = 0.005 * f_circuit;
  for (int k = 0; k < scan_points; ++k)
    if (std::abs(freqs[k] - f_circuit) < tol) return dvs[k];
  // Crossing nearest to zero bias first: f_z grows away from 0 V on the confining side.
  std::vector<int> order(scan_points - 1);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::min(std::abs(dvs[a]), std::abs(dvs[a + 1])) < std::min(std::abs(dvs[b]), std::abs(dvs[b + 1]));
  });
  for (int k : order) {
    double a = dvs[k], b = dvs[k + 1];
    double fa = freqs[k] - f_circuit, fb = freqs[k + 1] - f_circuit;
    if (!(fa * fb < 0.0) || freqs[k] == 0.0 || freqs[k + 1] == 0.0) continue;
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a + b);
      const double fm = fz(m) - f_circuit;
      if (std::abs(fm) < tol) return m;
      if ((fm < 0.0) == (fa < 0.0)) a = m, fa = fm;
      else b = m, fb = fm;
    }
    return 0.5 * (a + b);
  }
  std::ostringstream os;
  os << "no bias in [" << v_lo << ", " << v_hi << "] V gives an axial frequency of " << f_circuit << " Hz";
  throw NotFound(os.str(), std::move(table));
}

// ---------------------------------------------------------------- profiles

struct ProfileRow {
  double s = 0.0;
  Vec3 r;
  double phi = 0.0;
};

/// Potential at `samples` points on the segment point ± half_length·direction.
template <FieldSource F>
std::vector<ProfileRow> axial_profile(const F& field, const Vec3& point, Vec3 direction, double half_length, int samples) {
  if (!(norm(direction) > 0.0)) throw InvalidArgument("profile direction must be non-zero");
  if (!(half_length > 0.0)) throw InvalidArgument("profile half-length must be positive");
  if (samples < 2) throw InvalidArgument("profile needs at least 2 samples");
  direction = (1.0 / norm(direction)) * direction;
  std::vector<ProfileRow> out;
  for (int k = 0; k < samples; ++k) {
    const double s = half_length * (2.0 * k - (samples - 1)) / (samples - 1);
    const Vec3 r = point + s * direction;
    if (field.classify(r) == Region::outside) throw DomainError("profile leaves the field domain");
    out.push_back({s, r, field.potential(r)});
  }
  return out;
}

struct WellRow {
  double s = 0.0;  // arc length along the path
  Vec3 point;
  bool has_minimum = false;
  double z_min = 0.0;
  double curvature = 0.0;
};

/// At each path point, samples the potential along z on [-half_range, half_range]
/// with spacing `step` and reports the local minimum closest to the point
/// (parabolic refinement) and the second difference there.
template <FieldSource F>
std::vector<WellRow> z_well_scan(const F& field, const std::vector<Vec3>& path, double half_range, double step) {
  if (!(step > 0.0 && half_range >= 2.0 * step)) throw InvalidArgument("z scan needs half_range >= 2 steps");
  const int n = static_cast<int>(std::floor(half_range / step + 1e-9));
  std::vector<WellRow> out;
  double s = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (k > 0) s += norm(path[k] - path[k - 1]);
    WellRow row{s, path[k]};
    std::vector<double> phi(2 * n + 1);
    for (int m = -n; m <= n; ++m) {
      const Vec3 r = path[k] + Vec3{0, 0, m * step};
      if (field.classify(r) == Region::outside) throw DomainError("z scan leaves the field domain");
      phi[m + n] = field.potential(r);
    }
    int best = -1;
    for (int m = 1; m < 2 * n; ++m)
      if (phi[m] < phi[m - 1] && phi[m] <= phi[m + 1] && (best < 0 || std::abs(m - n) < std::abs(best - n))) best = m;
    if (best >= 0) {
      const double a = phi[best - 1], b = phi[best], c = phi[best + 1];
      const double den = a - 2.0 * b + c;
      row.has_minimum = true;
      row.curvature = den / (step * step);
      row.z_min = path[k].z + ((best - n) + (den > 0.0 ? 0.5 * (a - c) / den : 0.0)) * step;
    }
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------- csv

inline void write_profile_csv(std::ostream& os, const std::vector<ProfileRow>& rows) {
  os << "s_m,x,y,z,phi_V\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.12e,%.12e,%.12e,%.12e,%.12e\n", r.s, r.r.x, r.r.y, r.r.z, r.phi);
    os << buf;
  }
}

inline void write_gamma_csv(std::ostream& os, const GammaScan& scan) {
  os << "gamma,residual_rms_rel\n";
  char buf[80];
  for (const auto& [g, r] : scan.curve) {
    std::snprintf(buf, sizeof buf, "%.12e,%.12e\n", g, r);
    os << buf;
  }
}

}  // namespace penning
