#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace xicoal {

// A point of the infinite simplex with finitely many positive coordinates,
// stored in non-increasing order with its moment sums cached.
class SimplexPoint {
 public:
  std::span<const double> coords() const { return coords_; }
  std::size_t size() const { return coords_.size(); }
  double s1() const { return s1_; }
  double s2() const { return s2_; }
  // S(x) = sum x_i^2 + (sum x_i)^2
  double s_reg() const { return s2_ + s1_ * s1_; }

  SimplexPoint scaled(double c) const;

  bool operator==(const SimplexPoint& other) const {
    return coords_ == other.coords_;
  }

 private:
  friend SimplexPoint make_simplex_point(std::span<const double> raw);
  std::vector<double> coords_;
  double s1_ = 0.0;
  double s2_ = 0.0;
};

// Drops zeros, sorts non-increasing, caches moments.
// Throws EmptyPoint (all zero) or NotInSimplex (negative entry or sum > 1).
SimplexPoint make_simplex_point(std::span<const double> raw);
inline SimplexPoint make_simplex_point(std::initializer_list<double> raw) {
  return make_simplex_point(std::span<const double>(raw.begin(), raw.size()));
}

struct WeightedPoint {
  double weight;
  SimplexPoint point;
  bool operator==(const WeightedPoint&) const = default;
};

struct FiniteAtomic {
  std::vector<WeightedPoint> atoms;
  bool operator==(const FiniteAtomic&) const = default;
};

struct LambdaAtom {
  double weight;
  double x;
  bool operator==(const LambdaAtom&) const = default;
};

// weight * Beta(a, b) density on [0, 1].
struct BetaComponent {
  double a;
  double b;
  double weight;
  bool operator==(const BetaComponent&) const = default;
};

struct LambdaOnUnit {
  std::vector<LambdaAtom> atoms;
  std::optional<BetaComponent> beta;
  bool operator==(const LambdaOnUnit&) const = default;
};

enum class DyadicRule { InverseSquare, Full };

// Level n carries an atom of mass scale * 2^-n at the point with
// count(n) coordinates equal to 2^-n.
struct DyadicFamily {
  DyadicRule rule;
  int levels;
  double scale = 1.0;
  bool operator==(const DyadicFamily&) const = default;
};

struct Kingman {
  double a;
  bool operator==(const Kingman&) const = default;
};

using MeasureVariant = std::variant<FiniteAtomic, LambdaOnUnit, DyadicFamily, Kingman>;

inline constexpr int kMaxDyadicLevels = 62;

// Number of coordinates at level n, clamped to the admissible range
// [1, 2^{n-1} - 1] (the upper bound only applies once it is >= 1).
std::uint64_t dyadic_count(DyadicRule rule, int n);
const char* to_string(DyadicRule rule);

class XiMeasure {
 public:
  static XiMeasure finite_atomic(std::vector<WeightedPoint> atoms);
  static XiMeasure lambda(std::vector<LambdaAtom> atoms,
                          std::optional<BetaComponent> beta = std::nullopt);
  static XiMeasure dyadic(DyadicRule rule, int levels, double scale = 1.0);
  static XiMeasure kingman(double a);

  const MeasureVariant& variant() const { return variant_; }
  double total_mass() const { return total_mass_; }
  std::string describe() const;

  // Rescaled copy with total mass 1.
  XiMeasure normalized() const;

  template <class T>
  const T* as() const {
    return std::get_if<T>(&variant_);
  }

  bool operator==(const XiMeasure& other) const { return variant_ == other.variant_; }

 private:
  explicit XiMeasure(MeasureVariant v);
  MeasureVariant variant_;
  double total_mass_ = 0.0;
};

// One paintbox atom of a discrete measure: either an explicit point or a
// point whose `count` coordinates all equal `value` (dyadic levels).
struct AtomView {
  double weight;
  double s1;
  double s2;
  const SimplexPoint* point = nullptr;
  std::uint64_t count = 0;
  double value = 0.0;

  // sum_i g(x_i)
  template <class G>
  double sum_coords(G&& g) const {
    if (point != nullptr) {
      double s = 0.0;
      for (double x : point->coords()) s += g(x);
      return s;
    }
    return static_cast<double>(count) * g(value);
  }
};

// Atoms of FiniteAtomic, DyadicFamily, or atom-only LambdaOnUnit measures.
// Throws UnsupportedMeasure otherwise. Views into `m` must not outlive it.
std::vector<AtomView> atom_views(const XiMeasure& m);
bool has_atom_views(const XiMeasure& m);

struct ValueWithError {
  double value;
  double error;
};

// psi_Xi(q) = int sum_i (e^{-q x_i} - 1 + q x_i) / sum_i x_i^2 Xi(dx)
double psi(const XiMeasure& m, double q);
// error carries quadrature error plus, for dyadic measures, the bound
// q^2 2^-levels on the omitted deeper levels of the infinite family.
ValueWithError psi_with_error(const XiMeasure& m, double q);

// int_0^1 g(x) Beta(a,b)(dx) with endpoint substitutions that absorb the
// density singularities. g must be bounded on [0,1]. On [split, 1/2] the
// integral runs in log x, which suits g with a scale change near `split`.
double beta_expectation(const BetaComponent& beta, const std::function<double(double)>& g,
                        double* error = nullptr, double split = 0.5);

enum class RegularityClass { Regular, NonRegularDiverging, Inconclusive };
const char* to_string(RegularityClass c);

struct RegularityVerdict {
  std::vector<double> partial_sums;
  RegularityClass classification = RegularityClass::Inconclusive;
  // True when the verdict extrapolates an infinite family from finitely
  // many levels.
  bool heuristic = false;
  // Fitted power-law decay exponent of the increments (dyadic only).
  double decay_exponent = 0.0;
};

// Partial sums of int (sum x_i)^2 / sum x_i^2 Xi(dx).
RegularityVerdict regularity_integral(const XiMeasure& m, int budget);

XiMeasure parse_measure_spec(std::string_view text);
XiMeasure measure_from_json(const nlohmann::json& j);
nlohmann::json measure_to_json(const XiMeasure& m);
XiMeasure load_measure_file(const std::string& path);

}  // namespace xicoal
