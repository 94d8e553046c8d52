#pragma once

// Capacity sweeps over one carrier and their CSV serialization.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mcra/error.hpp"
#include "mcra/oracle.hpp"
#include "mcra/scenario.hpp"
#include "mcra/staged_allocator.hpp"

namespace mcra {

struct SweepRow {
  double sweep_value = 0.0;
  std::optional<AllocationReport> report;  // empty when the allocation failed
  std::string error;

  bool ok() const noexcept { return report.has_value(); }
};

// Rows come back in the order of `values` regardless of worker count.
inline std::vector<SweepRow> run_sweep(const Scenario& scenario, int carrier_id,
                                       const std::vector<double>& values,
                                       std::map<int, double> fixed = {}, unsigned workers = 1) {
  scenario.carrier(carrier_id);
  std::vector<SweepRow> rows(values.size());
  auto run_one = [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.sweep_value = values[i];
    try {
      auto caps = fixed;
      caps[carrier_id] = values[i];
      row.report = allocate(scenario.users, scenario.resolve(caps), scenario.tolerance);
    } catch (const Error& e) {
      row.error = e.what();
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(values.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < values.size(); ++i) run_one(i);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < values.size(); i = next++) run_one(i);
    });
  for (auto& t : pool) t.join();
  return rows;
}

inline std::vector<SweepRow> run_sweep(const Scenario& scenario, int carrier_id,
                                       const SweepRange& range, unsigned workers = 1) {
  return run_sweep(scenario, carrier_id, range.values(), {}, workers);
}

// Column layout, a pure function of the scenario's id sets.
struct CsvSchema {
  std::vector<int> user_ids;     // ascending
  std::vector<int> carrier_ids;  // ascending

  static CsvSchema of(const Scenario& sc) {
    CsvSchema s;
    for (const auto& u : sc.users) s.user_ids.push_back(u.id);
    for (const auto& c : sc.carriers) s.carrier_ids.push_back(c.id);
    std::sort(s.user_ids.begin(), s.user_ids.end());
    std::sort(s.carrier_ids.begin(), s.carrier_ids.end());
    return s;
  }

  std::vector<std::string> header() const {
    std::vector<std::string> h{"sweep_value"};
    for (int c : carrier_ids)
      for (int u : user_ids) h.push_back("r_" + std::to_string(u) + "_c" + std::to_string(c));
    for (int u : user_ids) h.push_back("r_" + std::to_string(u) + "_final");
    for (int c : carrier_ids) h.push_back("p_c" + std::to_string(c));
    for (int c : carrier_ids) h.push_back("case_c" + std::to_string(c));
    return h;
  }
};

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string csv_text(const std::vector<SweepRow>& rows, const CsvSchema& schema) {
  std::vector<const SweepRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SweepRow* a, const SweepRow* b) { return a->sweep_value < b->sweep_value; });

  std::ostringstream out;
  const auto header = schema.header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';

  for (const SweepRow* row : sorted) {
    std::vector<std::string> cells{format_number(row->sweep_value)};
    if (!row->ok()) {
      cells.resize(header.size(), "error");
    } else {
      const auto& rep = *row->report;
      for (int c : schema.carrier_ids) {
        const auto& st = rep.stage_for(c);
        for (int u : schema.user_ids) cells.push_back(format_number(st.carrier_rate(u)));
      }
      for (int u : schema.user_ids) cells.push_back(format_number(rep.final_rate.at(u)));
      for (int c : schema.carrier_ids) {
        const auto& st = rep.stage_for(c);
        cells.push_back(st.result ? format_number(st.result->shadow_price) : "");
      }
      for (int c : schema.carrier_ids) {
        const auto& st = rep.stage_for(c);
        cells.push_back(st.stage_case ? to_string(st.stage_case->kind) : "skipped");
      }
    }
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  }
  return out.str();
}

inline void write_csv(const std::vector<SweepRow>& rows, const CsvSchema& schema,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open CSV output: " + path);
  out << csv_text(rows, schema);
  if (!out) throw IoError("write failed: " + path);
}

// KKT certificate for every solved stage of a report.
struct StageCertificate {
  int carrier_id;
  KktReport kkt;
  bool passed;
};

inline constexpr double kStationarityLimit = 1e-3;

inline std::vector<StageCertificate> certify(const AllocationReport& rep) {
  std::vector<StageCertificate> out;
  for (const auto& st : rep.stages) {
    if (!st.result) continue;
    const auto kkt = kkt_check(st.input, *st.result, rep.tolerance);
    const bool ok = kkt.stationarity <= kStationarityLimit &&
                    kkt.complementarity <= kStationarityLimit &&
                    kkt.budget_residual <= rep.tolerance * st.capacity &&
                    kkt.reservation_violation <= 0.0;
    out.push_back({st.carrier_id, kkt, ok});
  }
  return out;
}

}  // namespace mcra
