#pragma once

// Application utility models: normalized sigmoidal-like (real-time traffic)
// and normalized logarithmic (delay-tolerant traffic).
//
// All quantities are evaluated through the simplified closed forms
//
//   sigmoidal:    U(r) = (1 - e^{-a r}) / (1 + e^{-a (r - b)})
//   logarithmic:  U(r) = log(1 + k r) / log(1 + k r_max)
//
// The sigmoidal form is algebraically identical to c (sigma(a(r-b)) - d) with
// c = 1 + e^{-ab}, d = 1 / (1 + e^{ab}), but never materializes e^{ab}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>

#include "mcra/error.hpp"

namespace mcra {

struct Sigmoidal {
  double a;  // steepness, 1/rate-unit
  double b;  // inflection rate

  // Normalization constants of the textbook form, derived from (a, b).
  double c() const { return 1.0 + std::exp(-a * b); }
  double d() const { return 1.0 / (1.0 + std::exp(a * b)); }

  bool operator==(const Sigmoidal&) const = default;
};

struct Logarithmic {
  double k;      // slope, 1/rate-unit
  double r_max;  // rate giving 100% utilization

  bool operator==(const Logarithmic&) const = default;
};

class UtilityFunction {
 public:
  using Model = std::variant<Sigmoidal, Logarithmic>;

  static UtilityFunction sigmoidal(double a, double b) {
    if (!(a > 0.0) || !std::isfinite(a))
      throw InvalidParameter("sigmoidal utility: a must be finite and > 0");
    if (!(b > 0.0) || !std::isfinite(b))
      throw InvalidParameter("sigmoidal utility: b must be finite and > 0");
    return UtilityFunction(Sigmoidal{a, b});
  }

  static UtilityFunction logarithmic(double k, double r_max) {
    if (!(k > 0.0) || !std::isfinite(k))
      throw InvalidParameter("logarithmic utility: k must be finite and > 0");
    if (!(r_max > 0.0) || !std::isfinite(r_max))
      throw InvalidParameter("logarithmic utility: r_max must be finite and > 0");
    return UtilityFunction(Logarithmic{k, r_max});
  }

  const Model& model() const noexcept { return model_; }
  bool is_sigmoidal() const noexcept { return std::holds_alternative<Sigmoidal>(model_); }
  bool is_logarithmic() const noexcept { return std::holds_alternative<Logarithmic>(model_); }

  // Characteristic rate of the curve (inflection point or 100% rate).
  double scale() const noexcept {
    return std::visit(
        [](const auto& m) {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, Sigmoidal>)
            return m.b;
          else
            return m.r_max;
        },
        model_);
  }

  std::string describe() const;

  bool operator==(const UtilityFunction&) const = default;

 private:
  explicit UtilityFunction(Model m) : model_(m) {}
  Model model_;
};

namespace detail {

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// 1 / (1 + e^{-x}).
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 - e^{-x}) for x > 0.
inline double log1mexp(double x) {
  return x < std::numbers::ln2 ? std::log(-std::expm1(-x)) : std::log1p(-std::exp(-x));
}

}  // namespace detail

inline double utility(const UtilityFunction& u, double r) {
  if (!(r >= 0.0)) throw DomainError("utility: rate must be >= 0");
  return std::visit(
      [r](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Sigmoidal>) {
          if (r == 0.0) return 0.0;
          return -std::expm1(-m.a * r) * detail::logistic(m.a * (r - m.b));
        } else {
          return std::log1p(m.k * r) / std::log1p(m.k * m.r_max);
        }
      },
      u.model());
}

inline double log_utility(const UtilityFunction& u, double r) {
  if (!(r > 0.0)) throw DomainError("log_utility: rate must be > 0");
  return std::visit(
      [r](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Sigmoidal>) {
          return detail::log1mexp(m.a * r) - detail::softplus(-m.a * (r - m.b));
        } else {
          return std::log(std::log1p(m.k * r)) - std::log(std::log1p(m.k * m.r_max));
        }
      },
      u.model());
}

// d/dr log U(r). Strictly positive and strictly decreasing on r > 0.
inline double marginal_log_utility(const UtilityFunction& u, double r) {
  if (!(r > 0.0)) throw DomainError("marginal_log_utility: rate must be > 0");
  return std::visit(
      [r](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Sigmoidal>) {
          // a e^{-ar} / (1 - e^{-ar}) + a e^{-s} / (1 + e^{-s}), s = a(r - b)
          return m.a / std::expm1(m.a * r) + m.a * detail::logistic(-m.a * (r - m.b));
        } else {
          const double kr = m.k * r;
          return m.k / ((1.0 + kr) * std::log1p(kr));
        }
      },
      u.model());
}

// log of marginal_log_utility, finite wherever the marginal itself would
// underflow (deep in a sigmoid's upper tail).
inline double log_marginal_log_utility(const UtilityFunction& u, double r) {
  if (!(r > 0.0)) throw DomainError("log_marginal_log_utility: rate must be > 0");
  return std::visit(
      [r](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Sigmoidal>) {
          const double ar = m.a * r;
          const double t1 = -(ar + detail::log1mexp(ar));      // log(1 / (e^{ar} - 1))
          const double t2 = -detail::softplus(m.a * (r - m.b));  // log sigma(-s)
          const double hi = std::max(t1, t2);
          return std::log(m.a) + hi + std::log1p(std::exp(std::min(t1, t2) - hi));
        } else {
          const double kr = m.k * r;
          return std::log(m.k) - std::log1p(kr) - std::log(std::log1p(kr));
        }
      },
      u.model());
}

// Smallest rate inverse_marginal resolves, relative to the search bracket.
// Solutions below it are reported as zero demand.
inline constexpr double kInverseResolution = 1e-6;

// inverse_marginal with the price given as its logarithm, so prices far
// below the smallest double are still representable.
inline double inverse_log_marginal(const UtilityFunction& u, double log_price, double r_hint_max) {
  if (std::isnan(log_price) || !std::isfinite(log_price))
    throw InvalidParameter("inverse_marginal: price must be finite and > 0");
  if (!(r_hint_max > 0.0) || !std::isfinite(r_hint_max))
    throw InvalidParameter("inverse_marginal: r_hint_max must be finite and > 0");

  double hi = r_hint_max;
  if (log_marginal_log_utility(u, hi) > log_price) return hi;
  double lo = kInverseResolution * r_hint_max;
  if (log_marginal_log_utility(u, lo) <= log_price) return 0.0;

  // Invariant: marginal(lo) > price >= marginal(hi).
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double lm = log_marginal_log_utility(u, mid);
    if (lm == log_price) return mid;
    (lm > log_price ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Solves marginal_log_utility(u, r) = price for r on (0, r_hint_max] by
// bisection. Returns r_hint_max when the marginal is still above the price at
// the top of the bracket, and 0 when the solution lies below the resolution
// floor kInverseResolution * r_hint_max.
inline double inverse_marginal(const UtilityFunction& u, double price, double r_hint_max) {
  if (!(price > 0.0) || !std::isfinite(price))
    throw InvalidParameter("inverse_marginal: price must be finite and > 0");
  return inverse_log_marginal(u, std::log(price), r_hint_max);
}

inline std::string UtilityFunction::describe() const {
  return std::visit(
      [](const auto& m) -> std::string {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Sigmoidal>)
          return "sigmoidal(a=" + std::to_string(m.a) + ", b=" + std::to_string(m.b) + ")";
        else
          return "logarithmic(k=" + std::to_string(m.k) + ", r_max=" + std::to_string(m.r_max) + ")";
      },
      model_);
}

}  // namespace mcra
