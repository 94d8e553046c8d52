#pragma once

// Coverage-based user grouping. A user belongs to carrier j's group when it
// lies strictly inside the carrier's coverage radius.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mcra/error.hpp"
#include "mcra/utility.hpp"

namespace mcra {

enum class UserClass { Vip, Regular };

inline const char* to_string(UserClass c) { return c == UserClass::Vip ? "vip" : "regular"; }

struct User {
  int id;
  UserClass user_class;
  double distance;  // from the base station, same unit as coverage radii
  UtilityFunction utility;
  double r_req;  // minimum required rate, 0 for regular users

  bool is_vip() const noexcept { return user_class == UserClass::Vip; }
};

struct Carrier {
  int id;
  double coverage_radius;
  double capacity;
};

inline void validate(const User& u) {
  const std::string who = "user " + std::to_string(u.id);
  if (!(u.distance >= 0.0) || !std::isfinite(u.distance))
    throw InvalidParameter(who + ": distance must be finite and >= 0");
  if (!std::isfinite(u.r_req) || u.r_req < 0.0)
    throw InvalidParameter(who + ": r_req must be finite and >= 0");
  if (u.user_class == UserClass::Regular && u.r_req != 0.0)
    throw InvalidParameter(who + ": regular users must have r_req = 0");
  if (u.user_class == UserClass::Vip && !(u.r_req > 0.0))
    throw InvalidParameter(who + ": VIP users must have r_req > 0");
}

inline void validate(const Carrier& c) {
  const std::string who = "carrier " + std::to_string(c.id);
  if (!(c.coverage_radius > 0.0) || !std::isfinite(c.coverage_radius))
    throw InvalidParameter(who + ": coverage_radius must be finite and > 0");
  if (!(c.capacity > 0.0) || !std::isfinite(c.capacity))
    throw InvalidParameter(who + ": capacity must be finite and > 0");
}

struct CarrierGroup {
  std::vector<int> members;  // ascending user ids
  std::vector<int> vip;
  std::vector<int> regular;
};

struct UserGroups {
  std::map<int, CarrierGroup> by_carrier;        // carrier id -> groups
  std::map<int, std::vector<int>> in_range;      // user id -> ascending carrier ids

  const CarrierGroup& group(int carrier_id) const { return by_carrier.at(carrier_id); }
  const std::vector<int>& carriers_of(int user_id) const { return in_range.at(user_id); }
  std::size_t carrier_count(int user_id) const { return in_range.at(user_id).size(); }
};

namespace detail {

template <typename T>
void require_unique_ids(const std::vector<T>& items, const char* what) {
  std::set<int> seen;
  for (const auto& item : items)
    if (!seen.insert(item.id).second)
      throw DuplicateId(std::string("duplicate ") + what + " id " + std::to_string(item.id));
}

}  // namespace detail

inline UserGroups build_groups(const std::vector<User>& users, const std::vector<Carrier>& carriers) {
  detail::require_unique_ids(users, "user");
  detail::require_unique_ids(carriers, "carrier");

  std::vector<const User*> sorted_users;
  sorted_users.reserve(users.size());
  for (const auto& u : users) sorted_users.push_back(&u);
  std::sort(sorted_users.begin(), sorted_users.end(),
            [](const User* x, const User* y) { return x->id < y->id; });

  UserGroups groups;
  for (const auto* u : sorted_users) groups.in_range[u->id];
  for (const auto& c : carriers) {
    auto& g = groups.by_carrier[c.id];
    for (const auto* u : sorted_users) {
      if (!(u->distance < c.coverage_radius)) continue;
      g.members.push_back(u->id);
      (u->is_vip() ? g.vip : g.regular).push_back(u->id);
    }
  }
  // Filled in a second pass so the per-user lists come out in carrier-id order.
  for (const auto& [cid, g] : groups.by_carrier)
    for (int uid : g.members) groups.in_range[uid].push_back(cid);
  return groups;
}

// Processing order: ascending coverage radius, ties by ascending id.
inline std::vector<int> carrier_order(const std::vector<Carrier>& carriers) {
  std::vector<const Carrier*> sorted;
  sorted.reserve(carriers.size());
  for (const auto& c : carriers) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [](const Carrier* x, const Carrier* y) {
    if (x->coverage_radius != y->coverage_radius) return x->coverage_radius < y->coverage_radius;
    return x->id < y->id;
  });
  std::vector<int> order;
  order.reserve(sorted.size());
  for (const auto* c : sorted) order.push_back(c->id);
  return order;
}

}  // namespace mcra
