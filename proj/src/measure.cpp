#include "xicoal/measure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xicoal/error.hpp"
#include "xicoal/numerics.hpp"
#include "xicoal/quadrature.hpp"

namespace xicoal {
namespace {

// Neumaier-compensated sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorKind::ValidationError, what);
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

constexpr double kSimplexSlack = 1e-12;

}  // namespace

SimplexPoint make_simplex_point(std::span<const double> raw) {
  SimplexPoint p;
  p.coords_.reserve(raw.size());
  for (double v : raw) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::NotInSimplex, "simplex coordinates must be finite and non-negative");
    }
    if (v > 0.0) p.coords_.push_back(v);
  }
  if (p.coords_.empty()) {
    throw Error(ErrorKind::EmptyPoint, "point has no strictly positive coordinate");
  }
  std::sort(p.coords_.begin(), p.coords_.end(), std::greater<>());
  CompensatedSum s1;
  CompensatedSum s2;
  for (double v : p.coords_) {
    s1.add(v);
    s2.add(v * v);
  }
  if (s1.value() > 1.0 + kSimplexSlack) {
    std::ostringstream msg;
    msg << "coordinates sum to " << s1.value() << " > 1";
    throw Error(ErrorKind::NotInSimplex, msg.str());
  }
  p.s1_ = std::min(s1.value(), 1.0);
  p.s2_ = s2.value();
  return p;
}

SimplexPoint SimplexPoint::scaled(double c) const {
  std::vector<double> v(coords_.begin(), coords_.end());
  for (double& x : v) x *= c;
  return make_simplex_point(v);
}

std::uint64_t dyadic_count(DyadicRule rule, int n) {
  const std::uint64_t pow2 = std::uint64_t{1} << n;
  std::uint64_t raw = 0;
  switch (rule) {
    case DyadicRule::InverseSquare:
      raw = pow2 / (static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n));
      break;
    case DyadicRule::Full:
      raw = pow2 - 1;
      break;
  }
  const std::uint64_t cap = (pow2 / 2 >= 2) ? pow2 / 2 - 1 : pow2 - 1;
  return std::clamp<std::uint64_t>(raw, 1, cap);
}

const char* to_string(DyadicRule rule) {
  return rule == DyadicRule::Full ? "full" : "inverse_square";
}

XiMeasure::XiMeasure(MeasureVariant v) : variant_(std::move(v)) {
  std::visit(
      [this](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FiniteAtomic>) {
          for (const auto& a : m.atoms) total_mass_ += a.weight;
        } else if constexpr (std::is_same_v<T, LambdaOnUnit>) {
          for (const auto& a : m.atoms) total_mass_ += a.weight;
          if (m.beta) total_mass_ += m.beta->weight;
        } else if constexpr (std::is_same_v<T, DyadicFamily>) {
          total_mass_ = m.scale * -std::expm1(-m.levels * std::log(2.0));
        } else {
          total_mass_ = m.a;
        }
      },
      variant_);
}

XiMeasure XiMeasure::finite_atomic(std::vector<WeightedPoint> atoms) {
  if (atoms.empty()) invalid("finite_atomic measure needs at least one atom");
  for (const auto& a : atoms) {
    if (!positive_finite(a.weight)) invalid("atom weights must be strictly positive");
    if (a.point.s1() >= 1.0 - kSimplexSlack) {
      invalid("atom coordinates sum to 1 (point lies in Delta_f)");
    }
  }
  return XiMeasure(FiniteAtomic{std::move(atoms)});
}

XiMeasure XiMeasure::lambda(std::vector<LambdaAtom> atoms, std::optional<BetaComponent> beta) {
  if (atoms.empty() && !beta) invalid("lambda measure needs atoms or a beta component");
  for (const auto& a : atoms) {
    if (!positive_finite(a.weight)) invalid("atom weights must be strictly positive");
    if (!(a.x > 0.0 && a.x < 1.0)) invalid("lambda atom location must lie in (0, 1)");
  }
  if (beta) {
    if (!positive_finite(beta->a) || !positive_finite(beta->b)) {
      invalid("beta parameters must be strictly positive");
    }
    if (!positive_finite(beta->weight)) invalid("beta weight must be strictly positive");
  }
  return XiMeasure(LambdaOnUnit{std::move(atoms), beta});
}

XiMeasure XiMeasure::dyadic(DyadicRule rule, int levels, double scale) {
  if (levels < 1 || levels > kMaxDyadicLevels) {
    invalid("dyadic levels must be in [1, " + std::to_string(kMaxDyadicLevels) + "]");
  }
  if (!positive_finite(scale)) invalid("dyadic scale must be strictly positive");
  return XiMeasure(DyadicFamily{rule, levels, scale});
}

XiMeasure XiMeasure::kingman(double a) {
  if (!positive_finite(a)) invalid("kingman mass must be strictly positive");
  return XiMeasure(Kingman{a});
}

XiMeasure XiMeasure::normalized() const {
  const double c = 1.0 / total_mass_;
  return std::visit(
      [c](const auto& m) -> XiMeasure {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FiniteAtomic>) {
          auto atoms = m.atoms;
          for (auto& a : atoms) a.weight *= c;
          return XiMeasure::finite_atomic(std::move(atoms));
        } else if constexpr (std::is_same_v<T, LambdaOnUnit>) {
          auto atoms = m.atoms;
          for (auto& a : atoms) a.weight *= c;
          auto beta = m.beta;
          if (beta) beta->weight *= c;
          return XiMeasure::lambda(std::move(atoms), beta);
        } else if constexpr (std::is_same_v<T, DyadicFamily>) {
          return XiMeasure::dyadic(m.rule, m.levels, m.scale * c);
        } else {
          return XiMeasure::kingman(1.0);
        }
      },
      variant_);
}

std::string XiMeasure::describe() const {
  std::ostringstream out;
  std::visit(
      [&out](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FiniteAtomic>) {
          out << "finite_atomic{";
          for (std::size_t i = 0; i < m.atoms.size(); ++i) {
            if (i) out << "; ";
            out << "w=" << m.atoms[i].weight << " at (";
            const auto c = m.atoms[i].point.coords();
            for (std::size_t k = 0; k < c.size(); ++k) out << (k ? "," : "") << c[k];
            out << ")";
          }
          out << "}";
        } else if constexpr (std::is_same_v<T, LambdaOnUnit>) {
          out << "lambda{";
          for (const auto& a : m.atoms) out << "w=" << a.weight << " at " << a.x << "; ";
          if (m.beta) out << "beta(" << m.beta->a << "," << m.beta->b << ") w=" << m.beta->weight;
          out << "}";
        } else if constexpr (std::is_same_v<T, DyadicFamily>) {
          out << "dyadic{f=" << to_string(m.rule) << ", levels=" << m.levels << "}";
        } else {
          out << "kingman{a=" << m.a << "}";
        }
      },
      variant_);
  return out.str();
}

bool has_atom_views(const XiMeasure& m) {
  if (m.as<FiniteAtomic>() || m.as<DyadicFamily>()) return true;
  if (const auto* l = m.as<LambdaOnUnit>()) return !l->beta;
  return false;
}

std::vector<AtomView> atom_views(const XiMeasure& m) {
  std::vector<AtomView> out;
  if (const auto* f = m.as<FiniteAtomic>()) {
    for (const auto& a : f->atoms) {
      out.push_back(AtomView{a.weight, a.point.s1(), a.point.s2(), &a.point});
    }
  } else if (const auto* d = m.as<DyadicFamily>()) {
    for (int n = 1; n <= d->levels; ++n) {
      const double x = std::ldexp(1.0, -n);
      const std::uint64_t cnt = dyadic_count(d->rule, n);
      const double c = static_cast<double>(cnt);
      out.push_back(AtomView{d->scale * x, c * x, c * x * x, nullptr, cnt, x});
    }
  } else if (const auto* l = m.as<LambdaOnUnit>(); l && !l->beta) {
    for (const auto& a : l->atoms) {
      out.push_back(AtomView{a.weight, a.x, a.x * a.x, nullptr, 1, a.x});
    }
  } else {
    throw Error(ErrorKind::UnsupportedMeasure,
                "measure has no finite paintbox atom decomposition: " + m.describe());
  }
  return out;
}

double beta_expectation(const BetaComponent& beta, const std::function<double(double)>& g,
                        double* error, double split) {
  const double a = beta.a;
  const double b = beta.b;
  split = std::clamp(split, 1e-300, 0.5);
  // [0, split] with x = u^{1/a}: x^{a-1} dx = du / a.
  auto left = [&](double u) {
    if (u <= 0.0) return g(0.0) / a;
    const double x = std::exp(std::log(u) / a);
    return g(x) * std::exp((b - 1.0) * std::log1p(-x)) / a;
  };
  // [split, 1/2] with x = e^s: x^{a-1} dx = x^a ds.
  auto middle = [&](double s) {
    const double x = std::exp(s);
    return g(x) * std::exp(a * s + (b - 1.0) * std::log1p(-x));
  };
  // [1/2, 1] with 1 - x = w^{1/b}: (1-x)^{b-1} dx = dw / b.
  auto right = [&](double w) {
    if (w <= 0.0) return g(1.0) / b;
    const double y = std::exp(std::log(w) / b);
    const double x = 1.0 - y;
    return g(x) * std::exp((a - 1.0) * std::log(x)) / b;
  };
  const QuadratureOptions opts;
  const auto l = adaptive_simpson(left, 0.0, std::exp(a * std::log(split)), opts);
  QuadratureResult mid;
  if (split < 0.5) mid = adaptive_simpson(middle, std::log(split), std::log(0.5), opts);
  const auto r = adaptive_simpson(right, 0.0, std::exp(-b * std::log(2.0)), opts);
  const double total = l.value + mid.value + r.value;
  const double err = l.error + mid.error + r.error;
  if ((!l.converged || !mid.converged || !r.converged) &&
      err > std::max(opts.abs_tol, opts.rel_tol * std::fabs(total))) {
    throw Error(ErrorKind::QuadratureFailure, "beta-density quadrature did not converge");
  }
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double norm = std::exp(-log_beta);
  if (error) *error = err * norm;
  return total * norm;
}

ValueWithError psi_with_error(const XiMeasure& m, double q) {
  if (!(q >= 0.0)) invalid("psi requires q >= 0");
  if (const auto* k = m.as<Kingman>()) return {k->a * q * q / 2.0, 0.0};
  ValueWithError out{0.0, 0.0};
  const auto* lam = m.as<LambdaOnUnit>();
  if (lam && lam->beta) {
    for (const auto& a : lam->atoms) out.value += a.weight * phi_exp(q * a.x) / (a.x * a.x);
    const double half_q2 = q * q / 2.0;
    auto g = [q, half_q2](double x) {
      const double x2 = x * x;
      if (x2 < 1e-280) return half_q2;
      return phi_exp(q * x) / x2;
    };
    double err = 0.0;
    out.value += lam->beta->weight * beta_expectation(*lam->beta, g, &err, q > 2.0 ? 1.0 / q : 0.5);
    out.error += lam->beta->weight * err;
    return out;
  }
  for (const auto& atom : atom_views(m)) {
    out.value += atom.weight * atom.sum_coords([q](double x) { return phi_exp(q * x); }) / atom.s2;
  }
  if (const auto* d = m.as<DyadicFamily>()) {
    out.error += d->scale * q * q * std::ldexp(1.0, -d->levels);
  }
  return out;
}

double psi(const XiMeasure& m, double q) { return psi_with_error(m, q).value; }

const char* to_string(RegularityClass c) {
  switch (c) {
    case RegularityClass::Regular: return "Regular";
    case RegularityClass::NonRegularDiverging: return "NonRegularDiverging";
    case RegularityClass::Inconclusive: return "Inconclusive";
  }
  return "Unknown";
}

RegularityVerdict regularity_integral(const XiMeasure& m, int budget) {
  if (budget < 1) invalid("regularity budget must be >= 1");
  RegularityVerdict out;
  double acc = 0.0;
  if (const auto* f = m.as<FiniteAtomic>()) {
    for (const auto& a : f->atoms) {
      acc += a.weight * a.point.s1() * a.point.s1() / a.point.s2();
      out.partial_sums.push_back(acc);
    }
    out.classification = RegularityClass::Regular;
    return out;
  }
  if (const auto* l = m.as<LambdaOnUnit>()) {
    // (sum x)^2 / sum x^2 = 1 on one-coordinate points.
    for (const auto& a : l->atoms) {
      acc += a.weight;
      out.partial_sums.push_back(acc);
    }
    if (l->beta) out.partial_sums.push_back(acc + l->beta->weight);
    out.classification = RegularityClass::Regular;
    return out;
  }
  if (const auto* k = m.as<Kingman>()) {
    // Limit of the ratio along one-coordinate points approaching zero.
    out.partial_sums.push_back(k->a);
    out.classification = RegularityClass::Regular;
    return out;
  }
  const auto& d = std::get<DyadicFamily>(m.variant());
  const int levels = std::min(budget, d.levels);
  std::vector<double> increments;
  for (int n = 1; n <= levels; ++n) {
    // weight * (c x)^2 / (c x^2) = scale * 2^-n * c
    const double inc = d.scale * std::ldexp(static_cast<double>(dyadic_count(d.rule, n)), -n);
    increments.push_back(inc);
    acc += inc;
    out.partial_sums.push_back(acc);
  }
  out.heuristic = true;
  // Least-squares slope of log(increment) against log(n) over the upper half.
  const int first = levels / 2;
  const int pts = levels - first;
  if (pts < 4) {
    out.classification = RegularityClass::Inconclusive;
    return out;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = first; i < levels; ++i) {
    const double lx = std::log(static_cast<double>(i + 1));
    const double ly = std::log(increments[static_cast<std::size_t>(i)]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (pts * sxy - sx * sy) / (pts * sxx - sx * sx);
  out.decay_exponent = -slope;
  if (out.decay_exponent >= 1.5) {
    out.classification = RegularityClass::Regular;
  } else if (out.decay_exponent <= 0.5) {
    out.classification = RegularityClass::NonRegularDiverging;
  } else {
    out.classification = RegularityClass::Inconclusive;
  }
  return out;
}

namespace {

double number_field(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_number()) {
    invalid(std::string("missing or non-numeric field \"") + key + "\"");
  }
  return j.at(key).get<double>();
}

}  // namespace

XiMeasure measure_from_json(const nlohmann::json& j) {
  if (!j.is_object()) invalid("measure description must be a JSON object");
  if (!j.contains("type") || !j.at("type").is_string()) invalid("missing string field \"type\"");
  const auto type = j.at("type").get<std::string>();
  const bool normalize = j.contains("normalize") && j.at("normalize").is_boolean() &&
                         j.at("normalize").get<bool>();
  std::optional<XiMeasure> m;
  if (type == "finite_atomic") {
    if (!j.contains("atoms") || !j.at("atoms").is_array()) invalid("finite_atomic needs \"atoms\" array");
    std::vector<WeightedPoint> atoms;
    for (const auto& a : j.at("atoms")) {
      const double w = number_field(a, "w");
      if (!a.contains("x") || !a.at("x").is_array()) invalid("atom needs \"x\" array");
      std::vector<double> xs;
      for (const auto& v : a.at("x")) {
        if (!v.is_number()) invalid("atom coordinates must be numbers");
        xs.push_back(v.get<double>());
      }
      try {
        atoms.push_back(WeightedPoint{w, make_simplex_point(xs)});
      } catch (const Error& e) {
        invalid(std::string("invalid atom point (") + to_string(e.kind()) + "): " + e.what());
      }
    }
    m = XiMeasure::finite_atomic(std::move(atoms));
  } else if (type == "lambda") {
    std::vector<LambdaAtom> atoms;
    if (j.contains("atoms")) {
      if (!j.at("atoms").is_array()) invalid("lambda \"atoms\" must be an array");
      for (const auto& a : j.at("atoms")) atoms.push_back({number_field(a, "w"), number_field(a, "x")});
    }
    std::optional<BetaComponent> beta;
    if (j.contains("beta")) {
      const auto& b = j.at("beta");
      beta = BetaComponent{number_field(b, "a"), number_field(b, "b"), number_field(b, "w")};
    }
    m = XiMeasure::lambda(std::move(atoms), beta);
  } else if (type == "dyadic") {
    if (!j.contains("f") || !j.at("f").is_string()) invalid("dyadic needs string field \"f\"");
    const auto f = j.at("f").get<std::string>();
    DyadicRule rule;
    if (f == "inverse_square") {
      rule = DyadicRule::InverseSquare;
    } else if (f == "full") {
      rule = DyadicRule::Full;
    } else {
      invalid("unknown dyadic rule \"" + f + "\"");
    }
    if (!j.contains("levels") || !j.at("levels").is_number_integer()) {
      invalid("dyadic needs integer field \"levels\"");
    }
    const double scale = j.contains("scale") ? number_field(j, "scale") : 1.0;
    m = XiMeasure::dyadic(rule, j.at("levels").get<int>(), scale);
  } else if (type == "kingman") {
    m = XiMeasure::kingman(number_field(j, "a"));
  } else {
    invalid("unknown measure type \"" + type + "\"");
  }
  return normalize ? m->normalized() : *m;
}

XiMeasure parse_measure_spec(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::ostringstream msg;
    msg << "malformed measure description at byte " << e.byte << ": " << e.what();
    throw Error(ErrorKind::ParseError, msg.str());
  }
  return measure_from_json(j);
}

nlohmann::json measure_to_json(const XiMeasure& m) {
  nlohmann::json j;
  std::visit(
      [&j](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, FiniteAtomic>) {
          j["type"] = "finite_atomic";
          j["atoms"] = nlohmann::json::array();
          for (const auto& a : v.atoms) {
            const auto c = a.point.coords();
            j["atoms"].push_back({{"w", a.weight}, {"x", std::vector<double>(c.begin(), c.end())}});
          }
        } else if constexpr (std::is_same_v<T, LambdaOnUnit>) {
          j["type"] = "lambda";
          j["atoms"] = nlohmann::json::array();
          for (const auto& a : v.atoms) j["atoms"].push_back({{"w", a.weight}, {"x", a.x}});
          if (v.beta) j["beta"] = {{"a", v.beta->a}, {"b", v.beta->b}, {"w", v.beta->weight}};
        } else if constexpr (std::is_same_v<T, DyadicFamily>) {
          j["type"] = "dyadic";
          j["f"] = to_string(v.rule);
          j["levels"] = v.levels;
          if (v.scale != 1.0) j["scale"] = v.scale;
        } else {
          j["type"] = "kingman";
          j["a"] = v.a;
        }
      },
      m.variant());
  return j;
}

XiMeasure load_measure_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open measure file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_measure_spec(buf.str());
}

}  // namespace xicoal
