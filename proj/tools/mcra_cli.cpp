// mcra: command-line front end for staged multi-carrier rate allocation.
//
//   mcra allocate <scenario> [--capacity id=value]... [--tolerance d] [--verify] [--json]
//   mcra sweep <scenario> --out <csv> [--carrier id --from a --to b --step s]
//              [--capacity id=value]... [--tolerance d] [--workers n] [--verify]
//
// Exit codes: 0 success, 1 usage/parse/validation/I-O error, 2 solver failure,
// 3 a KKT certificate failed under --verify.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mcra/mcra.hpp"

namespace {

constexpr int kUsageError = 1;
constexpr int kSolverError = 2;
constexpr int kVerifyFailed = 3;

std::map<int, double> parse_capacities(const std::vector<std::string>& specs) {
  std::map<int, double> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw mcra::ValidationError("--capacity expects id=value, got \"" + s + "\"");
    try {
      std::size_t used = 0;
      const int id = std::stoi(s.substr(0, eq), &used);
      if (used != eq) throw std::invalid_argument(s);
      const std::string value = s.substr(eq + 1);
      const double cap = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(s);
      out[id] = cap;
    } catch (const std::logic_error&) {
      throw mcra::ValidationError("--capacity expects id=value, got \"" + s + "\"");
    }
  }
  return out;
}

mcra::Scenario load(const std::string& path, std::optional<double> tolerance) {
  auto sc = mcra::load_scenario(path);
  if (tolerance) {
    if (!(*tolerance > 0.0)) throw mcra::ValidationError("--tolerance must be > 0");
    sc.tolerance = *tolerance;
  }
  return sc;
}

using mcra::format_number;

void print_report(const mcra::AllocationReport& rep, const std::vector<mcra::StageCertificate>* certs) {
  std::printf("tolerance %s\n", format_number(rep.tolerance).c_str());
  for (const auto& st : rep.stages) {
    std::printf("\nstage %zu  carrier %d  capacity %s  ", st.index, st.carrier_id,
                format_number(st.capacity).c_str());
    if (st.skipped()) {
      std::printf("skipped (no users in range, %s unallocated)\n", format_number(st.unallocated).c_str());
      continue;
    }
    std::printf("%s  price %s  (log %s)\n", mcra::to_string(st.stage_case->kind),
                format_number(st.result->shadow_price).c_str(),
                format_number(st.result->log_shadow_price).c_str());
    std::printf("  %6s %12s %12s %12s %12s\n", "user", "deficit", "reserved", "rate", "cumulative");
    for (const auto& [uid, q] : st.deficits) {
      const auto res = st.reservations.find(uid);
      std::printf("  %6d %12s %12s %12s %12s\n", uid, format_number(q).c_str(),
                  res == st.reservations.end() ? "-" : format_number(res->second).c_str(),
                  format_number(st.carrier_rate(uid)).c_str(),
                  format_number(st.cumulative_after.at(uid)).c_str());
    }
    if (certs)
      for (const auto& c : *certs)
        if (c.carrier_id == st.carrier_id)
          std::printf("  kkt: stationarity %s  complementarity %s  budget %s  %s\n",
                      format_number(c.kkt.stationarity).c_str(), format_number(c.kkt.complementarity).c_str(),
                      format_number(c.kkt.budget_residual).c_str(), c.passed ? "PASS" : "FAIL");
  }
  std::printf("\nfinal rates\n");
  for (const auto& u : rep.users)
    std::printf("  user %d (%s)  %s%s\n", u.id, mcra::to_string(u.user_class),
                format_number(rep.final_rate.at(u.id)).c_str(), rep.unreachable.count(u.id) ? "  unreachable" : "");
}

nlohmann::json report_json(const mcra::AllocationReport& rep, const std::vector<mcra::StageCertificate>* certs) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& st : rep.stages) {
    nlohmann::json js{{"index", st.index}, {"carrier", st.carrier_id}, {"capacity", st.capacity}};
    if (st.skipped()) {
      js["case"] = "skipped";
      js["unallocated"] = st.unallocated;
    } else {
      js["case"] = mcra::to_string(st.stage_case->kind);
      js["eligible"] = st.stage_case->eligible;
      js["log_price"] = st.result->log_shadow_price;
      js["price"] = st.result->shadow_price;
      nlohmann::json users = nlohmann::json::array();
      for (const auto& [uid, q] : st.deficits) {
        nlohmann::json ju{{"id", uid}, {"deficit", q}, {"rate", st.carrier_rate(uid)},
                          {"cumulative", st.cumulative_after.at(uid)}};
        if (const auto it = st.reservations.find(uid); it != st.reservations.end()) ju["reserved"] = it->second;
        users.push_back(ju);
      }
      js["users"] = users;
      if (certs)
        for (const auto& c : *certs)
          if (c.carrier_id == st.carrier_id)
            js["kkt"] = {{"stationarity", c.kkt.stationarity},
                         {"complementarity", c.kkt.complementarity},
                         {"budget_residual", c.kkt.budget_residual},
                         {"passed", c.passed}};
    }
    stages.push_back(js);
  }
  nlohmann::json finals = nlohmann::json::object();
  for (const auto& [uid, r] : rep.final_rate) finals[std::to_string(uid)] = r;
  return {{"tolerance", rep.tolerance}, {"stages", stages}, {"final_rates", finals},
          {"unreachable", std::vector<int>(rep.unreachable.begin(), rep.unreachable.end())}};
}

struct AllocateArgs {
  std::string scenario;
  std::vector<std::string> capacities;
  std::optional<double> tolerance;
  bool verify = false;
  bool json = false;
};

int run_allocate(const AllocateArgs& a) {
  const auto sc = load(a.scenario, a.tolerance);
  const auto carriers = sc.resolve(parse_capacities(a.capacities));
  mcra::AllocationReport rep;
  try {
    rep = mcra::allocate(sc.users, carriers, sc.tolerance);
  } catch (const mcra::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverError;
  }
  std::optional<std::vector<mcra::StageCertificate>> certs;
  if (a.verify) certs = mcra::certify(rep);
  if (a.json)
    std::cout << report_json(rep, certs ? &*certs : nullptr).dump(2) << '\n';
  else
    print_report(rep, certs ? &*certs : nullptr);
  if (certs)
    for (const auto& c : *certs)
      if (!c.passed) {
        std::cerr << "verification failed on carrier " << c.carrier_id << '\n';
        return kVerifyFailed;
      }
  return 0;
}

struct SweepArgs {
  std::string scenario;
  std::string out;
  std::optional<int> carrier;
  std::optional<double> from, to, step;
  std::vector<std::string> capacities;
  std::optional<double> tolerance;
  unsigned workers = 1;
  bool verify = false;
};

int run_sweep_command(const SweepArgs& a) {
  const auto sc = load(a.scenario, a.tolerance);
  const auto chosen = a.carrier ? a.carrier : sc.sweep_carrier();
  if (!chosen) throw mcra::ValidationError("no --carrier given and the scenario has no sweep block");
  const int cid = *chosen;
  const auto& spec = sc.carrier(cid);

  mcra::SweepRange range;
  if (a.from || a.to || a.step) {
    if (!(a.from && a.to && a.step)) throw mcra::ValidationError("--from, --to and --step must be given together");
    range = {*a.from, *a.to, *a.step};
    if (!(range.step > 0.0)) throw mcra::ValidationError("--step must be > 0");
    if (!(range.from > 0.0)) throw mcra::ValidationError("--from must be > 0");
  } else if (spec.sweep) {
    range = *spec.sweep;
  } else {
    throw mcra::ValidationError("carrier " + std::to_string(cid) + " has no sweep block; give --from/--to/--step");
  }

  auto fixed = parse_capacities(a.capacities);
  fixed.erase(cid);
  const auto rows = mcra::run_sweep(sc, cid, range.values(), fixed, a.workers);
  mcra::write_csv(rows, mcra::CsvSchema::of(sc), a.out);

  int status = 0;
  for (const auto& row : rows) {
    if (!row.ok()) {
      std::cerr << "row " << format_number(row.sweep_value) << ": " << row.error << '\n';
      status = kSolverError;
      continue;
    }
    if (!a.verify) continue;
    for (const auto& c : mcra::certify(*row.report)) {
      if (c.passed) continue;
      std::cerr << "row " << format_number(row.sweep_value) << ": verification failed on carrier "
                << c.carrier_id << " (stationarity " << format_number(c.kkt.stationarity) << ")\n";
      if (status == 0) status = kVerifyFailed;
    }
  }
  std::cerr << rows.size() << " rows written to " << a.out << '\n';
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Staged multi-carrier rate allocation with VIP and regular users"};
  app.require_subcommand(1);

  AllocateArgs alloc;
  auto* allocate_cmd = app.add_subcommand("allocate", "Run one allocation and print the per-stage report");
  allocate_cmd->add_option("scenario", alloc.scenario, "Scenario JSON file")->required();
  allocate_cmd->add_option("--capacity", alloc.capacities, "Carrier capacity override, id=value (repeatable)");
  allocate_cmd->add_option("--tolerance", alloc.tolerance, "Relative budget tolerance (overrides the file)");
  allocate_cmd->add_flag("--verify", alloc.verify, "Attach KKT certificates to every stage");
  allocate_cmd->add_flag("--json", alloc.json, "Print the report as JSON");

  SweepArgs sweep;
  sweep.workers = std::max(1u, std::thread::hardware_concurrency());
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one carrier's capacity and write a CSV");
  sweep_cmd->add_option("scenario", sweep.scenario, "Scenario JSON file")->required();
  sweep_cmd->add_option("--out", sweep.out, "Output CSV path")->required();
  sweep_cmd->add_option("--carrier", sweep.carrier, "Carrier to sweep (default: the file's sweep carrier)");
  sweep_cmd->add_option("--from", sweep.from, "First capacity value");
  sweep_cmd->add_option("--to", sweep.to, "Last capacity value (inclusive)");
  sweep_cmd->add_option("--step", sweep.step, "Capacity increment");
  sweep_cmd->add_option("--capacity", sweep.capacities, "Fixed capacity for another carrier, id=value");
  sweep_cmd->add_option("--tolerance", sweep.tolerance, "Relative budget tolerance (overrides the file)");
  sweep_cmd->add_option("--workers", sweep.workers, "Concurrent sweep points")->check(CLI::PositiveNumber);
  sweep_cmd->add_flag("--verify", sweep.verify, "Check every stage of every row against the KKT conditions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*allocate_cmd) return run_allocate(alloc);
    return run_sweep_command(sweep);
  } catch (const mcra::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }
}
