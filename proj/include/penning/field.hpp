#pragma once

#include <concepts>
#include <memory>
#include <utility>
#include <vector>

#include "penning/core.hpp"

namespace penning {

/// Where a point sits relative to a field source's valid region.
enum class Region { free, electrode, outside };

/// Anything that yields a potential (V) and an electric field (V/m) at a point.
template <class F>
concept FieldSource = requires(const F& f, const Vec3& r) {
  { f.potential(r) } -> std::convertible_to<double>;
  { f.efield(r) } -> std::convertible_to<Vec3>;
  { f.classify(r) } -> std::same_as<Region>;
};

/// Type-erased, shareable, immutable field source.
class AnyField {
 public:
  AnyField() = default;

  template <FieldSource F>
    requires(!std::same_as<std::remove_cvref_t<F>, AnyField>)
  AnyField(F field)  // NOLINT(google-explicit-constructor)
      : self_(std::make_shared<const Model<F>>(std::move(field))) {}

  double potential(const Vec3& r) const { return self_->potential(r); }
  Vec3 efield(const Vec3& r) const { return self_->efield(r); }
  Region classify(const Vec3& r) const { return self_->classify(r); }
  explicit operator bool() const noexcept { return static_cast<bool>(self_); }

 private:
  struct Concept {
    virtual ~Concept() = default;
    virtual double potential(const Vec3& r) const = 0;
    virtual Vec3 efield(const Vec3& r) const = 0;
    virtual Region classify(const Vec3& r) const = 0;
  };
  template <class F>
  struct Model final : Concept {
    explicit Model(F f) : field(std::move(f)) {}
    double potential(const Vec3& r) const override { return field.potential(r); }
    Vec3 efield(const Vec3& r) const override { return field.efield(r); }
    Region classify(const Vec3& r) const override { return field.classify(r); }
    F field;
  };

  std::shared_ptr<const Concept> self_;
};

/// Homogeneous field E with potential -E.r (zero at the origin). Defined everywhere.
struct UniformField {
  Vec3 e;
  double potential(const Vec3& r) const { return -dot(e, r); }
  Vec3 efield(const Vec3&) const { return e; }
  Region classify(const Vec3&) const { return Region::free; }
};

/// Ideal Penning quadrupole c0 + c_quad ((x-x0)^2 + (y-y0)^2 - 2 (z-z0)^2).
struct QuadrupoleField {
  double c0 = 0.0;
  double c_quad = 0.0;
  Vec3 center;

  double potential(const Vec3& r) const {
    const Vec3 d = r - center;
    return c0 + c_quad * (d.x * d.x + d.y * d.y - 2.0 * d.z * d.z);
  }
  Vec3 efield(const Vec3& r) const {
    const Vec3 d = r - center;
    return {-2.0 * c_quad * d.x, -2.0 * c_quad * d.y, 4.0 * c_quad * d.z};
  }
  Region classify(const Vec3&) const { return Region::free; }
};

/// Linear superposition sum_k w_k F_k. A point is blocked if any term blocks it.
class Superposition {
 public:
  Superposition() = default;
  void add(AnyField field, double weight = 1.0) { terms_.push_back({std::move(field), weight}); }
  std::size_t size() const noexcept { return terms_.size(); }

  double potential(const Vec3& r) const {
    double phi = 0.0;
    for (const auto& t : terms_) phi += t.weight * t.field.potential(r);
    return phi;
  }
  Vec3 efield(const Vec3& r) const {
    Vec3 e;
    for (const auto& t : terms_) e += t.weight * t.field.efield(r);
    return e;
  }
  Region classify(const Vec3& r) const {
    Region worst = Region::free;
    for (const auto& t : terms_) {
      const Region c = t.field.classify(r);
      if (c == Region::outside) return c;
      if (c == Region::electrode) worst = c;
    }
    return worst;
  }

 private:
  struct Term {
    AnyField field;
    double weight;
  };
  std::vector<Term> terms_;
};

}  // namespace penning
