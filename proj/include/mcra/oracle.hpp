#pragma once

// Independent reference solvers for a single carrier stage, used to certify
// solve_stage: exhaustive grid search over the budget simplex (<= 3
// participants), projected-gradient ascent, and a KKT residual report.
// None of these share code with the dual bisection path beyond the utility
// evaluations themselves.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mcra/carrier_solver.hpp"
#include "mcra/error.hpp"
#include "mcra/utility.hpp"

namespace mcra {

enum class OracleMethod { Grid, ProjectedGradient };

struct OracleResult {
  OracleMethod method;
  std::vector<int> user_ids;      // ascending
  std::vector<double> rates;      // carrier rates, aligned with user_ids
  double objective = -std::numeric_limits<double>::infinity();
  double resolution = 0.0;        // grid spacing, or final step size
  int iterations = 0;             // grid points visited, or ascent iterations
  std::vector<double> trace;      // objective per accepted ascent iterate
};

// Smallest total rate the ascent iterates may reach.
inline constexpr double kProjectionFloor = 1e-9;

namespace detail {

inline void require_feasible(const StageInput& in) {
  if (in.participants.empty()) throw InvalidParameter("oracle: no participants");
  if (!(in.capacity > 0.0)) throw InvalidParameter("oracle: capacity must be > 0");
  if (total_reservation(in.participants) > in.capacity)
    throw InfeasibleReservations("oracle: reservations exceed capacity");
}

// Euclidean projection of v onto {x : x >= 0, sum x = total}.
inline std::vector<double> project_simplex(const std::vector<double>& v, double total) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumsum += u[k];
    const double t = (cumsum - total) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) tau = t;
  }
  std::vector<double> x(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) x[i] = std::max(v[i] - tau, 0.0);
  return x;
}

}  // namespace detail

inline OracleResult grid_solve(const StageInput& input, int steps = 400) {
  detail::require_feasible(input);
  if (steps < 50) throw InvalidParameter("grid_solve: steps must be >= 50");
  const auto ps = detail::sorted_by_id(input.participants);
  const std::size_t n = ps.size();
  if (n > 3) throw TooManyParticipants("grid_solve: at most 3 participants, got " + std::to_string(n));

  const double h = input.capacity / steps;
  const double budget = input.capacity - total_reservation(ps);

  OracleResult best{OracleMethod::Grid, {}, {}, -std::numeric_limits<double>::infinity(), h, 0, {}};
  for (const auto& p : ps) best.user_ids.push_back(p.user_id);

  std::vector<double> rates(n);
  auto consider = [&](const std::vector<double>& incr) {
    for (std::size_t i = 0; i < n; ++i) rates[i] = ps[i].reservation + incr[i];
    ++best.iterations;
    const double f = stage_objective(ps, rates);
    if (f > best.objective) {
      best.objective = f;
      best.rates = rates;
    }
  };

  const long cells = static_cast<long>(std::floor(budget / h + 1e-9));
  std::vector<double> incr(n, 0.0);
  if (n == 1) {
    incr[0] = budget;
    consider(incr);
  } else if (n == 2) {
    for (long k = 0; k <= cells; ++k) {
      incr[0] = std::min(k * h, budget);
      incr[1] = budget - incr[0];
      consider(incr);
    }
  } else {
    for (long k0 = 0; k0 <= cells; ++k0) {
      incr[0] = std::min(k0 * h, budget);
      for (long k1 = 0; k0 + k1 <= cells; ++k1) {
        incr[1] = std::min(k1 * h, budget - incr[0]);
        incr[2] = std::max(0.0, budget - incr[0] - incr[1]);
        consider(incr);
      }
    }
  }
  return best;
}

// Gradient ascent on sum log U over the reservation-shifted budget simplex.
// The ascent direction is the gradient divided by its largest entry, formed
// from log-marginals so saturated sigmoids do not underflow to a zero step.
// `step` is the initial step length in rate units; it grows after accepted
// iterates and is halved on rejection, so the trace is monotone. A step that
// leaves the objective unchanged in double precision is accepted only if the
// directional derivative at the trial point still points forward.
inline OracleResult projected_gradient_solve(const StageInput& input, int iters = 10000,
                                             double step = 0.1) {
  detail::require_feasible(input);
  if (iters < 1) throw InvalidParameter("projected_gradient_solve: iters must be >= 1");
  if (!(step > 0.0)) throw InvalidParameter("projected_gradient_solve: step must be > 0");
  const auto ps = detail::sorted_by_id(input.participants);
  const std::size_t n = ps.size();
  const double budget = input.capacity - total_reservation(ps);

  std::vector<double> floor(n);
  double floor_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    floor[i] = std::max(0.0, kProjectionFloor - ps[i].base_rate());
    floor_sum += floor[i];
  }
  const double free_budget = std::max(0.0, budget - floor_sum);

  auto project = [&](const std::vector<double>& v) {
    std::vector<double> shifted(n);
    for (std::size_t i = 0; i < n; ++i) shifted[i] = v[i] - floor[i];
    auto x = detail::project_simplex(shifted, free_budget);
    for (std::size_t i = 0; i < n; ++i) x[i] += floor[i];
    return x;
  };
  auto carrier_rates = [&](const std::vector<double>& x) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = ps[i].reservation + x[i];
    return r;
  };
  auto objective = [&](const std::vector<double>& x) { return stage_objective(ps, carrier_rates(x)); };
  auto direction = [&](const std::vector<double>& x) {
    std::vector<double> lm(n);
    for (std::size_t i = 0; i < n; ++i) {
      lm[i] = log_marginal_log_utility(ps[i].utility, ps[i].base_rate() + x[i]);
      if (std::isnan(lm[i]) || lm[i] == std::numeric_limits<double>::infinity())
        throw NonFiniteGradient("projected_gradient_solve: non-finite gradient for user " +
                                std::to_string(ps[i].user_id));
    }
    const double top = *std::max_element(lm.begin(), lm.end());
    for (auto& v : lm) v = std::exp(v - top);
    return lm;
  };

  std::vector<double> x = project(std::vector<double>(n, budget / static_cast<double>(n)));
  double f = objective(x);

  OracleResult res{OracleMethod::ProjectedGradient, {}, {}, f, step, 0, {f}};
  for (const auto& p : ps) res.user_ids.push_back(p.user_id);

  double t = step;
  std::vector<double> trial(n);
  for (int it = 0; it < iters; ++it) {
    const auto d = direction(x);
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + t * d[i];
      auto y = project(trial);
      if (y == x) break;
      const double fy = objective(y);
      bool ok = fy > f;
      if (!ok && fy == f) {
        const auto dy = direction(y);
        double slope = 0.0;
        for (std::size_t i = 0; i < n; ++i) slope += dy[i] * (y[i] - x[i]);
        ok = slope >= 0.0;
      }
      if (ok) {
        x = std::move(y);
        f = fy;
        accepted = true;
        break;
      }
    }
    res.iterations = it + 1;
    if (!accepted) break;
    res.trace.push_back(f);
    t *= 1.5;
  }
  res.rates = carrier_rates(x);
  res.objective = f;
  res.resolution = t;
  return res;
}

struct KktReport {
  double stationarity = 0.0;      // max |marginal - p| / p over interior participants
  double complementarity = 0.0;   // max (marginal - p)_+ / p over zero-increment participants
  double budget_excess = 0.0;     // sum carrier rates - capacity (signed)
  double budget_residual = 0.0;   // |budget_excess|
  double reservation_violation = 0.0;  // max (reservation - carrier rate)_+
  int interior = 0;
  int at_zero = 0;
};

// Independent re-evaluation of the stationarity conditions at a candidate
// allocation. `carrier_rates` is aligned with the participants sorted by id.
// Participants whose increment is at most `zero_threshold` are classed as
// at-zero; the rest as interior. Ratios are formed in log space so prices
// below the double range are handled.
inline KktReport kkt_check_log(const StageInput& input, const std::vector<double>& carrier_rates,
                               double log_price, double zero_threshold = 1e-3) {
  const auto ps = detail::sorted_by_id(input.participants);
  if (carrier_rates.size() != ps.size())
    throw InvalidParameter("kkt_check: rate vector does not match participant count");
  if (!std::isfinite(log_price)) throw InvalidParameter("kkt_check: price must be finite and > 0");

  KktReport rep;
  double sum = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps[i];
    const double rate = carrier_rates[i];
    sum += rate;
    rep.reservation_violation = std::max(rep.reservation_violation, p.reservation - rate);
    const double incr = rate - p.reservation;
    const double at = std::max(p.offset + rate, kInverseResolution * input.capacity);
    const double ratio = std::expm1(log_marginal_log_utility(p.utility, at) - log_price);  // m/p - 1
    if (incr > zero_threshold) {
      ++rep.interior;
      rep.stationarity = std::max(rep.stationarity, std::abs(ratio));
    } else {
      ++rep.at_zero;
      rep.complementarity = std::max(rep.complementarity, std::max(0.0, ratio));
    }
  }
  rep.budget_excess = sum - input.capacity;
  rep.budget_residual = std::abs(rep.budget_excess);
  return rep;
}

inline KktReport kkt_check(const StageInput& input, const std::vector<double>& carrier_rates,
                           double price, double zero_threshold = 1e-3) {
  if (!(price > 0.0)) throw InvalidParameter("kkt_check: price must be > 0");
  return kkt_check_log(input, carrier_rates, std::log(price), zero_threshold);
}

inline KktReport kkt_check(const StageInput& input, const StageResult& result,
                           double zero_threshold = 1e-3) {
  const auto ps = detail::sorted_by_id(input.participants);
  std::vector<double> rates;
  for (const auto& p : ps) {
    const auto* r = result.find(p.user_id);
    rates.push_back(r ? r->carrier_rate : 0.0);
  }
  return kkt_check_log(input, rates, result.log_shadow_price, zero_threshold);
}

// Shadow price implied by an allocation that did not come with one: the mean
// marginal log-utility of the interior participants.
inline double implied_price(const StageInput& input, const std::vector<double>& carrier_rates,
                            double zero_threshold = 1e-3) {
  const auto ps = detail::sorted_by_id(input.participants);
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (carrier_rates[i] - ps[i].reservation <= zero_threshold) continue;
    s += marginal_log_utility(ps[i].utility, ps[i].offset + carrier_rates[i]);
    ++n;
  }
  return n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace mcra
