#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mcra/staged_allocator.hpp"
#include "reference_fixture.hpp"

using namespace mcra;
using namespace mcra::testing;

TEST(Deficits, Examples) {
  const auto users = reference_users();
  EXPECT_DOUBLE_EQ(compute_deficits(users, {6}, {{6, 0.0}}).at(6), 30.0);
  EXPECT_DOUBLE_EQ(compute_deficits(users, {2}, {{2, 42.0}}).at(2), 0.0);
  EXPECT_DOUBLE_EQ(compute_deficits(users, {5}, {{5, 0.0}}).at(5), 0.0);
  EXPECT_DOUBLE_EQ(compute_deficits(users, {5}, {{5, 17.0}}).at(5), 0.0);
  EXPECT_DOUBLE_EQ(compute_deficits(users, {4}, {{4, 10.0}}).at(4), 5.0);
  EXPECT_DOUBLE_EQ(compute_deficits(users, {8}, {}).at(8), 15.0);
}

TEST(SelectCase, ReferenceStageOne) {
  const auto g = build_groups(reference_users(), reference_carriers(60, 100));
  const auto q = compute_deficits(reference_users(), g.group(1).members, {});
  const auto sc = select_case(g.group(1), q, 60);
  ASSERT_TRUE(sc);
  EXPECT_EQ(sc->kind, AllocationCase::Case3);
  EXPECT_EQ(sc->eligible, (std::vector<int>{1, 2, 3, 4}));
  const auto res = build_reservations(*sc, q);
  EXPECT_EQ(res, (std::map<int, double>{{1, 0.0}, {2, 30.0}, {3, 0.0}, {4, 15.0}}));
}

TEST(SelectCase, StageTwoBoundary) {
  const auto g = build_groups(reference_users(), reference_carriers(60, 100));
  std::map<int, double> held{{1, 14.7}, {2, 30}, {3, 0.25}, {4, 15}, {5, 0}, {6, 0}, {7, 0}, {8, 0}};
  const auto q = compute_deficits(reference_users(), g.group(2).members, held);
  for (double r2 : {40.0, 45.0}) {
    const auto sc = select_case(g.group(2), q, r2);
    EXPECT_EQ(sc->kind, AllocationCase::Case2) << r2;
    EXPECT_EQ(sc->eligible, (std::vector<int>{2, 4, 6, 8}));
    for (const auto& [id, c] : build_reservations(*sc, q)) EXPECT_EQ(c, 0.0);
  }
  for (double r2 : {46.0, 50.0}) {
    const auto sc = select_case(g.group(2), q, r2);
    EXPECT_EQ(sc->kind, AllocationCase::Case3) << r2;
    EXPECT_EQ(sc->eligible, (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}));
    const auto res = build_reservations(*sc, q);
    EXPECT_EQ(res.at(6), 30.0);
    EXPECT_EQ(res.at(8), 15.0);
    EXPECT_EQ(res.at(2), 0.0);
    EXPECT_EQ(res.at(5), 0.0);
  }
}

TEST(SelectCase, Case1AndEmpty) {
  const auto g = build_groups(reference_users(), reference_carriers(60, 100));
  std::map<int, double> held{{1, 0}, {2, 30}, {3, 0}, {4, 15}};
  const auto q = compute_deficits(reference_users(), g.group(1).members, held);
  const auto sc = select_case(g.group(1), q, 60);
  EXPECT_EQ(sc->kind, AllocationCase::Case1);
  EXPECT_EQ(sc->eligible, (std::vector<int>{1, 2, 3, 4}));
  for (const auto& [id, c] : build_reservations(*sc, q)) EXPECT_EQ(c, 0.0);
  EXPECT_FALSE(select_case(CarrierGroup{}, {}, 10));
}

TEST(Allocate, ReferenceVipGuarantee) {
  const auto rep = allocate(reference_users(), reference_carriers(60, 100));
  ASSERT_EQ(rep.stages.size(), 2u);
  EXPECT_EQ(rep.stages[0].carrier_id, 1);
  EXPECT_EQ(rep.stages[0].stage_case->kind, AllocationCase::Case3);
  EXPECT_EQ(rep.stages[1].stage_case->kind, AllocationCase::Case3);
  for (const auto& u : rep.users) {
    EXPECT_GT(rep.final_rate.at(u.id), 0.0) << u.id;
    if (u.is_vip()) {
      EXPECT_GE(rep.final_rate.at(u.id), u.r_req) << u.id;
    }
  }
}

TEST(Allocate, ReferenceCase2ExcludesOuterRegulars) {
  const auto rep = allocate(reference_users(), reference_carriers(60, 40));
  const auto& st = rep.stage_for(2);
  EXPECT_EQ(st.stage_case->kind, AllocationCase::Case2);
  EXPECT_EQ(st.carrier_rate(5), 0.0);
  EXPECT_EQ(st.carrier_rate(7), 0.0);
  EXPECT_EQ(rep.final_rate.at(5), 0.0);
  EXPECT_EQ(rep.final_rate.at(7), 0.0);
  EXPECT_EQ(st.carrier_rate(1), 0.0);
  EXPECT_EQ(st.carrier_rate(3), 0.0);
}

TEST(Allocate, SingleRegularCarrierMatchesSolveStage) {
  std::vector<User> users{{3, UserClass::Regular, 10, log2(), 0},
                          {1, UserClass::Regular, 20, sig2(), 0},
                          {2, UserClass::Regular, 30, sig1(), 0}};
  const auto rep = allocate(users, {{7, 100, 55}});
  const StageInput in{7, 55, {{1, sig2(), 0, 0}, {2, sig1(), 0, 0}, {3, log2(), 0, 0}}};
  const auto direct = solve_stage(in);
  const auto& st = rep.stage_for(7);
  EXPECT_EQ(st.stage_case->kind, AllocationCase::Case1);
  EXPECT_EQ(st.result->log_shadow_price, direct.log_shadow_price);
  for (const auto& r : direct.rates) {
    EXPECT_EQ(st.carrier_rate(r.user_id), r.carrier_rate);
    EXPECT_EQ(rep.final_rate.at(r.user_id), r.carrier_rate);
  }
}

TEST(Allocate, UnreachableAndSkipped) {
  std::vector<User> users{{1, UserClass::Regular, 80, log2(), 0}, {2, UserClass::Vip, 5000, sig3(), 30}};
  const auto rep = allocate(users, {{1, 100, 20}, {2, 50, 30}});
  EXPECT_EQ(rep.unreachable, (std::set<int>{2}));
  EXPECT_EQ(rep.final_rate.at(2), 0.0);
  const auto& skipped = rep.stage_for(2);
  EXPECT_TRUE(skipped.skipped());
  EXPECT_EQ(skipped.unallocated, 30.0);
  EXPECT_EQ(rep.stages.front().carrier_id, 2);
  EXPECT_NEAR(rep.final_rate.at(1), 20.0, 1e-3 * 20);
}

TEST(Allocate, Errors) {
  EXPECT_THROW(allocate(reference_users(), reference_carriers(60, 100), 0.0), InvalidParameter);
  auto bad = reference_users();
  bad[1].r_req = 0;
  EXPECT_THROW(allocate(bad, reference_carriers(60, 100)), InvalidParameter);
  EXPECT_THROW(allocate(reference_users(), {{1, 500, 60}, {1, 1000, 10}}), DuplicateId);
  try {
    allocate(reference_users(), reference_carriers(60, 100), 1e-3, 1);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage_index(), 0u);
    EXPECT_EQ(e.carrier_id(), 1);
  }
}

TEST(Allocate, Deterministic) {
  const auto a = allocate(reference_users(), reference_carriers(60, 73));
  auto shuffled = reference_users();
  std::reverse(shuffled.begin(), shuffled.end());
  const auto b = allocate(shuffled, {{2, 1000, 73}, {1, 500, 60}});
  EXPECT_EQ(a.final_rate, b.final_rate);
  for (std::size_t j = 0; j < a.stages.size(); ++j)
    EXPECT_EQ(a.stages[j].result->log_shadow_price, b.stages[j].result->log_shadow_price);
}

namespace {

struct RandomScenario {
  std::vector<User> users;
  std::vector<Carrier> carriers;
};

RandomScenario random_scenario(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0, 1);
  RandomScenario s;
  const int k = 1 + static_cast<int>(rng() % 4);
  for (int j = 0; j < k; ++j) s.carriers.push_back({j + 1, 200 + 800 * u01(rng), 10 + 190 * u01(rng)});
  const int n = 1 + static_cast<int>(rng() % 10);
  for (int i = 0; i < n; ++i) {
    const bool vip = u01(rng) < 0.4;
    const auto u = u01(rng) < 0.5 ? UtilityFunction::logarithmic(0.5 + 14.5 * u01(rng), 100)
                                  : UtilityFunction::sigmoidal(0.5 + 4.5 * u01(rng), 5 + 35 * u01(rng));
    s.users.push_back({i + 1, vip ? UserClass::Vip : UserClass::Regular, 1100 * u01(rng), u,
                       vip ? 1 + 39 * u01(rng) : 0.0});
  }
  return s;
}

}  // namespace

TEST(AllocateProperties, ConservationAndMonotoneCumulative) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    const auto s = random_scenario(rng);
    const auto rep = allocate(s.users, s.carriers);
    double solved = 0.0, slack = 0.0, granted = 0.0;
    for (const auto& st : rep.stages) {
      if (st.result) {
        solved += st.capacity;
        slack += rep.tolerance * st.capacity;
      } else {
        EXPECT_EQ(st.unallocated, st.capacity);
      }
    }
    for (const auto& [id, r] : rep.final_rate) granted += r;
    EXPECT_NEAR(granted, solved, slack + 1e-9) << "scenario " << t;

    std::map<int, double> prev;
    for (const auto& u : rep.users) prev[u.id] = 0.0;
    for (const auto& st : rep.stages) {
      for (const auto& [id, c] : st.cumulative_after) {
        EXPECT_GE(c, prev.at(id));
        EXPECT_EQ(c, prev.at(id) + st.carrier_rate(id));
      }
      prev = st.cumulative_after;
    }
    for (const auto& u : rep.users) {
      double sum = 0.0;
      for (const auto& st : rep.stages) sum += st.carrier_rate(u.id);
      EXPECT_EQ(rep.final_rate.at(u.id), sum) << "user " << u.id;
      if (rep.unreachable.count(u.id)) {
        EXPECT_EQ(rep.final_rate.at(u.id), 0.0);
      }
    }
  }
}

TEST(AllocateProperties, CaseExhaustiveness) {
  std::mt19937_64 rng(78);
  for (int t = 0; t < 100; ++t) {
    const auto s = random_scenario(rng);
    const auto rep = allocate(s.users, s.carriers);
    for (const auto& st : rep.stages) {
      const auto& g = rep.groups.group(st.carrier_id);
      ASSERT_EQ(st.skipped(), g.members.empty());
      if (st.skipped()) continue;
      double vip_q = 0.0;
      bool short_any = false;
      for (int id : g.members) {
        short_any = short_any || st.deficits.at(id) > 0.0;
        vip_q += st.deficits.at(id);
      }
      const auto expected = !short_any ? AllocationCase::Case1
                            : vip_q >= st.capacity ? AllocationCase::Case2
                                                   : AllocationCase::Case3;
      EXPECT_EQ(st.stage_case->kind, expected);
      EXPECT_EQ(st.result->case_used, expected);
      EXPECT_EQ(st.stage_case->eligible, expected == AllocationCase::Case2 ? g.vip : g.members);
    }
  }
}

TEST(AllocateProperties, SigmoidBelowInflectionServedBeforeLog) {
  // Equal offsets: while the sigmoidal participant is below its inflection
  // its marginal exceeds the logarithmic one, so the log user gets nothing
  // until the sigmoid has been served.
  for (double cap : {2.0, 5.0, 8.0, 12.0}) {
    std::vector<User> users{{1, UserClass::Regular, 10, UtilityFunction::sigmoidal(1, 15), 0},
                            {2, UserClass::Regular, 10, log3(), 0}};
    const auto rep = allocate(users, {{1, 100, cap}});
    const auto& st = rep.stage_for(1);
    const double sig_rate = st.carrier_rate(1);
    if (st.carrier_rate(2) > rep.tolerance) {
      EXPECT_GT(sig_rate, 0.0) << cap;
    }
    if (sig_rate < 15.0) {
      EXPECT_GE(marginal_log_utility(users[0].utility, sig_rate), st.result->shadow_price * (1 - 1e-3)) << cap;
    }
  }
}
