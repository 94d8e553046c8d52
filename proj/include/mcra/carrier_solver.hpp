#pragma once

// Single-carrier utility-proportional-fair allocation.
//
// Maximizes the sum of log U(offset + reservation + increment) over the
// participants, subject to reservations plus increments fitting the carrier
// capacity and every increment being non-negative. The offset is the rate a
// user already holds from earlier carriers; the reservation is pre-committed
// on this carrier. Log-utilities are strictly concave, so the optimum is the
// unique point at which every participant's marginal log-utility meets a
// common shadow price (or the participant's demand truncates at zero). The
// price is found by bisection on its logarithm.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "mcra/error.hpp"
#include "mcra/utility.hpp"

namespace mcra {

enum class AllocationCase { Case1, Case2, Case3 };

inline const char* to_string(AllocationCase c) {
  switch (c) {
    case AllocationCase::Case1: return "case1";
    case AllocationCase::Case2: return "case2";
    case AllocationCase::Case3: return "case3";
  }
  return "?";
}

struct Participant {
  int user_id;
  UtilityFunction utility;
  double offset;       // rate held from earlier carriers
  double reservation;  // pre-committed rate on this carrier

  double base_rate() const noexcept { return offset + reservation; }
};

struct StageInput {
  int carrier_id = 0;
  double capacity = 0.0;
  std::vector<Participant> participants;
};

struct ParticipantRate {
  int user_id;
  double incremental;   // rate granted on top of the reservation
  double carrier_rate;  // reservation + incremental
};

struct StageResult {
  int carrier_id = 0;
  AllocationCase case_used = AllocationCase::Case1;
  double shadow_price = 0.0;
  double log_shadow_price = 0.0;       // exact even where shadow_price underflows
  std::vector<ParticipantRate> rates;  // ascending user id
  double residual = 0.0;               // |sum carrier_rate - capacity|
  int iterations = 0;

  const ParticipantRate* find(int user_id) const {
    for (const auto& r : rates)
      if (r.user_id == user_id) return &r;
    return nullptr;
  }
};

struct SolverOptions {
  double tolerance = 1e-3;  // relative budget tolerance and zero-rate threshold
  int max_iterations = 200;
};

// Truncated best response of one participant at a given (log) price: the
// extra rate r >= 0 at which its marginal log-utility at offset + reservation + r
// equals the price, never more than `budget`.
inline double demand_at_log_price(const Participant& p, double log_price, double budget) {
  if (!(budget > 0.0)) return 0.0;
  const double base = p.base_rate();
  const double hint = base + budget;
  if (base > 0.0 && log_marginal_log_utility(p.utility, base) <= log_price) return 0.0;
  const double total = inverse_log_marginal(p.utility, log_price, hint);
  if (total >= hint) return budget;
  return std::max(0.0, total - base);
}

inline double demand_at_price(const Participant& p, double price, double budget) {
  if (!(price > 0.0)) throw InvalidParameter("demand_at_price: price must be > 0");
  return demand_at_log_price(p, std::log(price), budget);
}

namespace detail {

inline void validate_stage(const StageInput& in, const SolverOptions& opt) {
  const std::string where = "carrier " + std::to_string(in.carrier_id);
  if (in.participants.empty()) throw InvalidParameter(where + ": no participants");
  if (!(in.capacity > 0.0) || !std::isfinite(in.capacity))
    throw InvalidParameter(where + ": capacity must be finite and > 0");
  if (!(opt.tolerance > 0.0)) throw InvalidParameter("solver tolerance must be > 0");
  if (opt.max_iterations < 1) throw InvalidParameter("solver max_iterations must be >= 1");
  for (const auto& p : in.participants) {
    if (!std::isfinite(p.offset) || p.offset < 0.0 || !std::isfinite(p.reservation) ||
        p.reservation < 0.0)
      throw InvalidParameter(where + ": user " + std::to_string(p.user_id) +
                             " has a negative or non-finite offset/reservation");
  }
}

inline std::vector<Participant> sorted_by_id(const std::vector<Participant>& ps) {
  std::vector<Participant> out = ps;
  std::stable_sort(out.begin(), out.end(),
                   [](const Participant& x, const Participant& y) { return x.user_id < y.user_id; });
  return out;
}

}  // namespace detail

inline double total_reservation(const std::vector<Participant>& ps) {
  double s = 0.0;
  for (const auto& p : ps) s += p.reservation;
  return s;
}

inline double aggregate_demand_log(const std::vector<Participant>& ps, double log_price,
                                   double budget) {
  double s = 0.0;
  for (const auto& p : ps) s += demand_at_log_price(p, log_price, budget);
  return s;
}

inline double aggregate_demand(const std::vector<Participant>& ps, double price, double budget) {
  return aggregate_demand_log(ps, std::log(price), budget);
}

inline StageResult solve_stage(const StageInput& input, const SolverOptions& opt = {}) {
  detail::validate_stage(input, opt);
  const auto ps = detail::sorted_by_id(input.participants);
  const double capacity = input.capacity;
  const double reserved = total_reservation(ps);
  if (reserved > capacity)
    throw InfeasibleReservations("carrier " + std::to_string(input.carrier_id) +
                                 ": reservations " + std::to_string(reserved) +
                                 " exceed capacity " + std::to_string(capacity));
  const double budget = capacity - reserved;

  auto demands = [&](double log_price) {
    std::vector<double> d(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) d[i] = demand_at_log_price(ps[i], log_price, budget);
    return d;
  };
  auto finish = [&](double log_price, const std::vector<double>& incr, int iterations) {
    StageResult res;
    res.carrier_id = input.carrier_id;
    res.log_shadow_price = log_price;
    res.shadow_price = std::exp(log_price);
    res.iterations = iterations;
    double sum = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      res.rates.push_back({ps[i].user_id, incr[i], ps[i].reservation + incr[i]});
      sum += ps[i].reservation + incr[i];
    }
    res.residual = std::abs(sum - capacity);
    return res;
  };

  if (budget <= 0.0) {
    // Reservations exhaust the carrier: the price is the highest marginal
    // among participants, which keeps every zero increment complementary.
    double log_price = -std::numeric_limits<double>::infinity();
    for (const auto& p : ps)
      log_price = std::max(log_price, log_marginal_log_utility(
                                          p.utility, std::max(p.base_rate(), kInverseResolution * capacity)));
    return finish(log_price, std::vector<double>(ps.size(), 0.0), 0);
  }

  const double slack = opt.tolerance * capacity;
  auto excess = [&](double log_price) { return aggregate_demand_log(ps, log_price, budget) - budget; };
  const std::string where = "carrier " + std::to_string(input.carrier_id);

  // Upper bracket (demand strictly below the budget) grows from p = 1 by
  // doubling; the lower bracket (demand at least the budget) starts at
  // tolerance * 1e-3 and steps down by factors of 1e3.
  double hi = 0.0;
  while (excess(hi) >= 0.0) {
    hi += std::numbers::ln2;
    if (hi > 700.0) throw NoConvergence(where + ": no price suppresses demand below capacity", 1.0, std::exp(hi));
  }
  double lo = std::min(std::log(opt.tolerance * 1e-3), hi - std::numbers::ln2);
  while (excess(lo) < 0.0) {
    lo -= std::log(1e3);
    if (lo < -1e6) throw NoConvergence(where + ": no price raises demand to capacity", 0.0, std::exp(hi));
  }

  int it = 0;
  bool collapsed = false;
  for (; it < opt.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) {
      collapsed = true;
      break;
    }
    (excess(mid) >= 0.0 ? lo : hi) = mid;
  }
  collapsed = collapsed || hi - lo <= 1e-12 * std::max(1.0, std::abs(lo));

  const auto d_lo = demands(lo);
  const auto d_hi = demands(hi);
  const double sum_lo = std::accumulate(d_lo.begin(), d_lo.end(), 0.0);
  const double sum_hi = std::accumulate(d_hi.begin(), d_hi.end(), 0.0);

  if (collapsed && sum_lo >= budget && sum_hi < budget) {
    // The bracket has shrunk to adjacent prices but demand still jumps across
    // the budget: some marginal is flat to double precision there (a sigmoid
    // well below its inflection, or a participant capped at the budget). Any
    // split of the jump satisfies stationarity, so fill the budget exactly.
    const double theta = (budget - sum_hi) / (sum_lo - sum_hi);
    std::vector<double> incr(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) incr[i] = d_hi[i] + theta * (d_lo[i] - d_hi[i]);
    return finish(lo, incr, it);
  }

  const double e_lo = std::abs(sum_lo - budget);
  const double e_hi = std::abs(sum_hi - budget);
  if (std::min(e_lo, e_hi) > slack)
    throw NoConvergence(where + ": budget residual " + std::to_string(std::min(e_lo, e_hi)) +
                            " above tolerance after " + std::to_string(it) + " iterations",
                        std::exp(lo), std::exp(hi));
  return e_lo <= e_hi ? finish(lo, d_lo, it) : finish(hi, d_hi, it);
}

// Objective sum of log U(offset + carrier rate) for given carrier rates
// (ordered like `participants`). -inf if any total rate is zero.
inline double stage_objective(const std::vector<Participant>& participants,
                              const std::vector<double>& carrier_rates) {
  double s = 0.0;
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const double total = participants[i].offset + carrier_rates[i];
    if (!(total > 0.0)) return -std::numeric_limits<double>::infinity();
    s += log_utility(participants[i].utility, total);
  }
  return s;
}

inline double stage_objective(const StageInput& input, const StageResult& result) {
  const auto ps = detail::sorted_by_id(input.participants);
  std::vector<double> rates;
  for (const auto& p : ps) {
    const auto* r = result.find(p.user_id);
    rates.push_back(r ? r->carrier_rate : 0.0);
  }
  return stage_objective(ps, rates);
}

}  // namespace mcra
