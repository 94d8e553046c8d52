#pragma once

// Multi-carrier allocation with user discrimination.
//
// Carriers are processed one at a time in ascending coverage radius. Before
// each stage the VIP deficits max(0, r_req - held rate) decide the regime:
//
//   Case 1  every user in range already meets its minimum: all users share
//           the carrier, no reservations.
//   Case 2  outstanding VIP deficits are at least the carrier capacity:
//           only VIP users share the carrier, no reservations.
//   Case 3  otherwise: all users share the carrier after each VIP deficit is
//           reserved up front.
//
// Each stage is solved by solve_stage and the granted rates accumulate into
// the held rate for the next one. A user's final rate is the sum of its
// carrier rates.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcra/carrier_solver.hpp"
#include "mcra/error.hpp"
#include "mcra/grouping.hpp"

namespace mcra {

struct StageCase {
  AllocationCase kind;
  std::vector<int> eligible;  // ascending user ids
};

struct StageRecord {
  std::size_t index = 0;  // position in processing order
  int carrier_id = 0;
  double capacity = 0.0;
  std::optional<StageCase> stage_case;  // empty: nobody in range, stage skipped
  std::map<int, double> deficits;       // every user in range
  std::map<int, double> reservations;   // every eligible user
  StageInput input;
  std::optional<StageResult> result;
  std::map<int, double> cumulative_after;  // held rate of every user after this stage
  double unallocated = 0.0;

  bool skipped() const noexcept { return !stage_case.has_value(); }

  // Reservation plus increment; zero for users not served by this stage.
  double carrier_rate(int user_id) const {
    if (!result) return 0.0;
    const auto* r = result->find(user_id);
    return r ? r->carrier_rate : 0.0;
  }
};

struct AllocationReport {
  std::vector<User> users;        // ascending id
  std::vector<Carrier> carriers;  // ascending id
  double tolerance = 1e-3;
  UserGroups groups;
  std::vector<StageRecord> stages;  // processing order
  std::map<int, double> final_rate;
  std::set<int> unreachable;  // users outside every carrier's coverage

  const StageRecord& stage_for(int carrier_id) const {
    for (const auto& s : stages)
      if (s.carrier_id == carrier_id) return s;
    throw InvalidParameter("no stage for carrier " + std::to_string(carrier_id));
  }
};

inline std::map<int, double> compute_deficits(const std::vector<User>& users,
                                              const std::vector<int>& user_ids,
                                              const std::map<int, double>& cumulative) {
  std::map<int, const User*> by_id;
  for (const auto& u : users) by_id[u.id] = &u;
  std::map<int, double> q;
  for (int id : user_ids) {
    const User& u = *by_id.at(id);
    const auto it = cumulative.find(id);
    const double held = it == cumulative.end() ? 0.0 : it->second;
    q[id] = held < u.r_req ? u.r_req - held : 0.0;
  }
  return q;
}

// Returns nullopt for an empty group. Deficits must cover every member; only
// VIP members can carry a positive one.
inline std::optional<StageCase> select_case(const CarrierGroup& group,
                                            const std::map<int, double>& deficits,
                                            double capacity) {
  if (group.members.empty()) return std::nullopt;
  double vip_deficit = 0.0;
  bool any_short = false;
  for (int id : group.vip) {
    const double q = deficits.at(id);
    vip_deficit += q;
    any_short = any_short || q > 0.0;
  }
  if (!any_short) return StageCase{AllocationCase::Case1, group.members};
  if (vip_deficit >= capacity) return StageCase{AllocationCase::Case2, group.vip};
  return StageCase{AllocationCase::Case3, group.members};
}

inline std::map<int, double> build_reservations(const StageCase& sc,
                                                const std::map<int, double>& deficits) {
  std::map<int, double> res;
  for (int id : sc.eligible) {
    const auto it = deficits.find(id);
    res[id] = sc.kind == AllocationCase::Case3 && it != deficits.end() ? it->second : 0.0;
  }
  return res;
}

inline AllocationReport allocate(std::vector<User> users, std::vector<Carrier> carriers,
                                 double tolerance = 1e-3, int max_iterations = 200) {
  if (!(tolerance > 0.0)) throw InvalidParameter("tolerance must be > 0");
  for (const auto& u : users) validate(u);
  for (const auto& c : carriers) validate(c);

  AllocationReport rep;
  rep.groups = build_groups(users, carriers);
  std::sort(users.begin(), users.end(), [](const User& x, const User& y) { return x.id < y.id; });
  std::sort(carriers.begin(), carriers.end(),
            [](const Carrier& x, const Carrier& y) { return x.id < y.id; });
  rep.users = users;
  rep.carriers = carriers;
  rep.tolerance = tolerance;

  std::map<int, const User*> user_by_id;
  for (const auto& u : rep.users) user_by_id[u.id] = &u;
  std::map<int, const Carrier*> carrier_by_id;
  for (const auto& c : rep.carriers) carrier_by_id[c.id] = &c;

  std::map<int, double> cumulative;
  for (const auto& u : rep.users) cumulative[u.id] = 0.0;

  const SolverOptions opt{tolerance, max_iterations};
  for (int cid : carrier_order(rep.carriers)) {
    const Carrier& carrier = *carrier_by_id.at(cid);
    const CarrierGroup& group = rep.groups.group(cid);

    StageRecord rec;
    rec.index = rep.stages.size();
    rec.carrier_id = cid;
    rec.capacity = carrier.capacity;
    rec.deficits = compute_deficits(rep.users, group.members, cumulative);
    rec.stage_case = select_case(group, rec.deficits, carrier.capacity);

    if (rec.stage_case) {
      rec.reservations = build_reservations(*rec.stage_case, rec.deficits);
      rec.input.carrier_id = cid;
      rec.input.capacity = carrier.capacity;
      for (int uid : rec.stage_case->eligible)
        rec.input.participants.push_back(
            {uid, user_by_id.at(uid)->utility, cumulative.at(uid), rec.reservations.at(uid)});
      try {
        rec.result = solve_stage(rec.input, opt);
      } catch (const Error& e) {
        throw StageError("stage " + std::to_string(rec.index) + " (carrier " + std::to_string(cid) +
                             "): " + e.what(),
                         rec.index, cid);
      }
      rec.result->case_used = rec.stage_case->kind;
      for (const auto& r : rec.result->rates) cumulative[r.user_id] += r.carrier_rate;
    } else {
      rec.unallocated = carrier.capacity;
    }
    rec.cumulative_after = cumulative;
    rep.stages.push_back(std::move(rec));
  }

  rep.final_rate = cumulative;
  for (const auto& u : rep.users)
    if (rep.groups.carriers_of(u.id).empty()) rep.unreachable.insert(u.id);
  return rep;
}

}  // namespace mcra
