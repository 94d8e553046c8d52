#pragma once

// Scenario files: the per-user application parameters and minimum rates
// that user equipment reports to the base station, plus the carrier table.
//
//   {
//     "tolerance": 0.001,
//     "users": [
//       {"id": 1, "class": "Regular", "distance": 120,
//        "utility": {"type": "sigmoidal", "params": {"a": 3, "b": 20}},
//        "r_req": 0}
//     ],
//     "carriers": [
//       {"id": 1, "coverage_radius": 500, "capacity": 60},
//       {"id": 2, "coverage_radius": 1000,
//        "sweep": {"from": 10, "to": 150, "step": 10}}
//     ]
//   }

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcra/error.hpp"
#include "mcra/grouping.hpp"
#include "mcra/utility.hpp"

namespace mcra {

struct SweepRange {
  double from = 0.0;
  double to = 0.0;
  double step = 1.0;

  // from, from + step, ... up to `to` inclusive; empty when from > to.
  std::vector<double> values() const {
    if (!(step > 0.0)) throw InvalidParameter("sweep step must be > 0");
    std::vector<double> out;
    if (from > to) return out;
    const long n = static_cast<long>(std::floor((to - from) / step + 1e-9));
    for (long k = 0; k <= n; ++k) out.push_back(from + static_cast<double>(k) * step);
    return out;
  }

  bool operator==(const SweepRange&) const = default;
};

struct CarrierSpec {
  int id = 0;
  double coverage_radius = 0.0;
  std::optional<double> capacity;
  std::optional<SweepRange> sweep;
};

struct Scenario {
  std::vector<User> users;
  std::vector<CarrierSpec> carriers;
  double tolerance = 1e-3;

  std::optional<int> sweep_carrier() const {
    for (const auto& c : carriers)
      if (c.sweep) return c.id;
    return std::nullopt;
  }

  const CarrierSpec& carrier(int id) const {
    for (const auto& c : carriers)
      if (c.id == id) return c;
    throw ValidationError("scenario has no carrier " + std::to_string(id));
  }

  // Concrete carrier table; `overrides` supplies capacities by carrier id and
  // takes precedence over the file. Every carrier must end up with one.
  std::vector<Carrier> resolve(const std::map<int, double>& overrides = {}) const {
    for (const auto& [id, cap] : overrides) carrier(id);
    std::vector<Carrier> out;
    for (const auto& c : carriers) {
      const auto it = overrides.find(c.id);
      std::optional<double> cap = it != overrides.end() ? std::optional(it->second) : c.capacity;
      if (!cap)
        throw ValidationError("carrier " + std::to_string(c.id) +
                              " has no fixed capacity (sweep carrier needs a value)");
      Carrier k{c.id, c.coverage_radius, *cap};
      try {
        validate(k);
      } catch (const InvalidParameter& e) {
        throw ValidationError(e.what());
      }
      out.push_back(k);
    }
    return out;
  }
};

namespace detail {

inline std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline const nlohmann::json& field(const nlohmann::json& obj, const std::string& key,
                                   const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key + ": missing field");
  return *it;
}

inline double number(const nlohmann::json& obj, const std::string& key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (!v.is_number()) throw ParseError(path + "." + key + ": expected a number");
  return v.get<double>();
}

inline int integer(const nlohmann::json& obj, const std::string& key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (!v.is_number_integer()) throw ParseError(path + "." + key + ": expected an integer");
  return v.get<int>();
}

inline std::string text(const nlohmann::json& obj, const std::string& key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (!v.is_string()) throw ParseError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

inline UtilityFunction parse_utility(const nlohmann::json& j, const std::string& path) {
  const std::string type = lower(text(j, "type", path));
  const auto& params = field(j, "params", path);
  const std::string ppath = path + ".params";
  try {
    if (type == "sigmoidal")
      return UtilityFunction::sigmoidal(number(params, "a", ppath), number(params, "b", ppath));
    if (type == "logarithmic")
      return UtilityFunction::logarithmic(number(params, "k", ppath), number(params, "r_max", ppath));
  } catch (const InvalidParameter& e) {
    throw ValidationError(path + ": " + e.what());
  }
  throw ParseError(path + ".type: expected \"sigmoidal\" or \"logarithmic\", got \"" + type + "\"");
}

inline nlohmann::json utility_json(const UtilityFunction& u) {
  return std::visit(
      [](const auto& m) -> nlohmann::json {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Sigmoidal>)
          return {{"type", "sigmoidal"}, {"params", {{"a", m.a}, {"b", m.b}}}};
        else
          return {{"type", "logarithmic"}, {"params", {{"k", m.k}, {"r_max", m.r_max}}}};
      },
      u.model());
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& root) {
  Scenario sc;
  if (!root.is_object()) throw ParseError("scenario: top level must be an object");
  if (root.contains("tolerance")) {
    sc.tolerance = detail::number(root, "tolerance", "scenario");
    if (!(sc.tolerance > 0.0)) throw ValidationError("scenario.tolerance: must be > 0");
  }

  const auto& users = detail::field(root, "users", "scenario");
  if (!users.is_array()) throw ParseError("scenario.users: expected an array");
  std::set<int> user_ids;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const std::string path = "users[" + std::to_string(i) + "]";
    const auto& ju = users[i];
    const int id = detail::integer(ju, "id", path);
    const std::string cls = detail::lower(detail::text(ju, "class", path));
    UserClass uc;
    if (cls == "vip")
      uc = UserClass::Vip;
    else if (cls == "regular")
      uc = UserClass::Regular;
    else
      throw ParseError(path + ".class: expected \"VIP\" or \"Regular\"");
    User u{id, uc, detail::number(ju, "distance", path),
           detail::parse_utility(detail::field(ju, "utility", path), path + ".utility"),
           detail::number(ju, "r_req", path)};
    try {
      validate(u);
    } catch (const InvalidParameter& e) {
      throw ValidationError(path + ": " + e.what());
    }
    if (!user_ids.insert(id).second) throw ValidationError(path + ": duplicate user id " + std::to_string(id));
    sc.users.push_back(u);
  }

  const auto& carriers = detail::field(root, "carriers", "scenario");
  if (!carriers.is_array()) throw ParseError("scenario.carriers: expected an array");
  std::set<int> carrier_ids;
  int sweeps = 0;
  for (std::size_t i = 0; i < carriers.size(); ++i) {
    const std::string path = "carriers[" + std::to_string(i) + "]";
    const auto& jc = carriers[i];
    CarrierSpec c;
    c.id = detail::integer(jc, "id", path);
    c.coverage_radius = detail::number(jc, "coverage_radius", path);
    if (!(c.coverage_radius > 0.0)) throw ValidationError(path + ".coverage_radius: must be > 0");
    if (jc.contains("capacity")) {
      c.capacity = detail::number(jc, "capacity", path);
      if (!(*c.capacity > 0.0)) throw ValidationError(path + ".capacity: must be > 0");
    }
    if (jc.contains("sweep")) {
      const auto& js = jc["sweep"];
      const std::string spath = path + ".sweep";
      c.sweep = SweepRange{detail::number(js, "from", spath), detail::number(js, "to", spath),
                           detail::number(js, "step", spath)};
      if (!(c.sweep->step > 0.0)) throw ValidationError(spath + ".step: must be > 0");
      if (!(c.sweep->from > 0.0)) throw ValidationError(spath + ".from: must be > 0");
      ++sweeps;
    }
    if (c.capacity.has_value() == c.sweep.has_value())
      throw ValidationError(path + ": exactly one of \"capacity\" or \"sweep\" is required");
    if (!carrier_ids.insert(c.id).second)
      throw ValidationError(path + ": duplicate carrier id " + std::to_string(c.id));
    sc.carriers.push_back(c);
  }
  if (sweeps > 1) throw ValidationError("scenario: at most one carrier may carry a sweep block");
  return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("scenario: malformed JSON at " + detail::line_context(text, e.byte) + ": " +
                     e.what());
  }
  return parse_scenario(root);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario_text(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline nlohmann::json to_json(const Scenario& sc) {
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : sc.users)
    users.push_back({{"id", u.id},
                     {"class", u.is_vip() ? "VIP" : "Regular"},
                     {"distance", u.distance},
                     {"utility", detail::utility_json(u.utility)},
                     {"r_req", u.r_req}});
  nlohmann::json carriers = nlohmann::json::array();
  for (const auto& c : sc.carriers) {
    nlohmann::json jc{{"id", c.id}, {"coverage_radius", c.coverage_radius}};
    if (c.capacity) jc["capacity"] = *c.capacity;
    if (c.sweep) jc["sweep"] = {{"from", c.sweep->from}, {"to", c.sweep->to}, {"step", c.sweep->step}};
    carriers.push_back(jc);
  }
  return {{"tolerance", sc.tolerance}, {"users", users}, {"carriers", carriers}};
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scenario file: " + path);
  out << to_json(sc).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace mcra
