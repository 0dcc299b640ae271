#include <gtest/gtest.h>

#include <map>

#include "support.hpp"

using namespace freebeacon;
using fbtest::compare_with_oracle;

TEST(Contributors, SetOperations) {
  ContributorSet a, b;
  a.insert(1);
  a.insert(70);
  b.insert(70);
  b.insert(3);
  EXPECT_TRUE(a.contains(70));
  EXPECT_FALSE(a.contains(3));
  EXPECT_FALSE(a.contains(500));
  EXPECT_EQ(a.merge(b), 1);
  EXPECT_EQ(a.size(), 3);
  ContributorSet c(a.words());
  EXPECT_TRUE(c == a);
  ContributorSet padded(std::vector<std::uint64_t>{a.words()[0], a.words()[1], 0, 0});
  EXPECT_TRUE(padded == a);
}

TEST(AggOps, Fold) {
  EXPECT_EQ(agg_combine(AggOp::Sum, 3, -5), -2);
  EXPECT_EQ(agg_combine(AggOp::Max, agg_identity(AggOp::Max), -5), -5);
  EXPECT_EQ(agg_lift(AggOp::Count, -700), 1);
  EXPECT_EQ(parse_agg_op("max"), AggOp::Max);
  EXPECT_THROW(parse_agg_op("mean"), ConfigError);
}

TEST(Plan, ActionListsSortedAndPaired) {
  for (Pattern p : {Pattern::Line, Pattern::Tree, Pattern::Ring, Pattern::Pairs})
    for (int n : {2, 3, 6, 9}) {
      const auto plan = build_plan(p, n, 4, std::max(1, n / 2), AggOp::Sum, 7);
      std::map<std::pair<std::int64_t, DeviceId>, int> sends, recvs;  // (key, sender)
      for (int d = 0; d < n; ++d) {
        const auto& acts = plan.actions[static_cast<std::size_t>(d)];
        for (std::size_t i = 1; i < acts.size(); ++i) ASSERT_LE(acts[i - 1].key, acts[i].key);
        for (const auto& a : acts) {
          if (a.send) ++sends[{a.key, d}];
          else ++recvs[{a.key, a.peer}];
        }
      }
      EXPECT_EQ(sends, recvs) << pattern_name(p) << " n=" << n;
    }
}

TEST(Plan, ItemsComeFromTheSeed) {
  const auto a = build_plan(Pattern::Line, 5, 3, 1, AggOp::Sum, 11);
  const auto b = build_plan(Pattern::Line, 5, 3, 1, AggOp::Sum, 11);
  const auto c = build_plan(Pattern::Line, 5, 3, 1, AggOp::Sum, 12);
  EXPECT_EQ(a.items, b.items);
  EXPECT_NE(a.items, c.items);
  for (const auto& m : a.items)
    for (const auto& [k, v] : m) {
      EXPECT_GE(v, -1000);
      EXPECT_LE(v, 1000);
    }
}

TEST(Plan, RingBatchesCoverAllItems) {
  // 7 items per device in batches of 3: (3, 3, 1).
  const auto plan = build_plan(Pattern::Ring, 4, 7, 3, AggOp::Sum, 1);
  EXPECT_EQ(plan.items[0].size(), 7u);
  EXPECT_TRUE(plan.items[0].count({2, 0}));
  EXPECT_FALSE(plan.items[0].count({2, 1}));
}

TEST(Ledger, CheckDetectsDuplicatesAndLosses) {
  const auto plan = build_plan(Pattern::Line, 3, 1, 1, AggOp::Sum, 3);
  auto ledgers = fbtest::ledgers_after_serial_execution(plan);
  EXPECT_TRUE(check_aggregates(plan, ledgers).ok) << check_aggregates(plan, ledgers).detail;

  auto dup = ledgers;
  merge_payload(dup[2], plan.op, {0, 0}, payload_of(ledgers[0], {0, 0}));
  EXPECT_FALSE(check_aggregates(plan, dup).ok);

  auto lost = initial_ledgers(plan);
  EXPECT_FALSE(check_aggregates(plan, lost).ok);  // three holders

  auto unshipped = ledgers;
  unshipped[1].partials[{0, 0}].shipped = false;
  EXPECT_FALSE(check_aggregates(plan, unshipped).ok);
}

TEST(Pipeline, LineBeatsSequentialWaves) {
  // Middle devices receive and send once per wave, one role per round.
  for (int n = 3; n <= 12; ++n)
    for (int k = 2; k <= 8; ++k) {
      const auto plan = build_plan(Pattern::Line, n, k, 1, AggOp::Sum, 1);
      const auto depth = fbtest::critical_path(plan);
      EXPECT_EQ(depth, 2 * k + n - 3) << n << "," << k;
      if (n >= 4) {
        EXPECT_LT(depth, k * (n - 1));
      } else {
        EXPECT_EQ(depth, k * (n - 1));
      }
    }
}

TEST(Pipeline, WavesNeverDeadlockOrExceedSerial) {
  for (Pattern p : {Pattern::Line, Pattern::Tree, Pattern::Ring})
    for (int n : {2, 3, 6, 8})
      for (int k : {1, 2, 5}) {
        const auto one = fbtest::critical_path(build_plan(p, n, 1, n, AggOp::Sum, 1));
        const auto many = fbtest::critical_path(build_plan(p, n, k, n, AggOp::Sum, 1));
        ASSERT_NE(one, -1);
        ASSERT_NE(many, -1) << pattern_name(p) << " n=" << n << " k=" << k;
        EXPECT_LE(many, k * one) << pattern_name(p) << " n=" << n << " k=" << k;
      }
}

TEST(Pipeline, EngineOverlapsWaves) {
  const int n = 5;
  auto run = [&](int k) {
    EngineConfig c;
    c.cycle = CycleConfig{51, 2, n, 1.0};
    c.mode = Mode::Aggregate;
    Simulation sim(c, fbtest::presynced_devices(n, 51, {StaticCharging{50}}),
                   build_plan(Pattern::Line, n, k, 1, AggOp::Sum, 1));
    const auto& m = sim.run_until_complete();
    EXPECT_TRUE(m.aggregate_ok) << m.aggregate_detail;
    return *m.completion_slot;
  };
  const auto one = run(1), four = run(4);
  EXPECT_LT(four, 4 * one);
}

TEST(Executor, MatchesOracleAcrossPatterns) {
  for (Pattern p : {Pattern::Line, Pattern::Tree, Pattern::Ring, Pattern::Pairs})
    for (int n : {2, 3, 6, 8})
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        if (p == Pattern::Pairs && n % 2) continue;
        ScenarioConfig sc;
        sc.mode = p == Pattern::Pairs ? Mode::Pairwise : Mode::Aggregate;
        sc.pattern = p;
        sc.n_devices = n;
        sc.items_per_device = 3;
        Simulation sim(make_engine_config(sc, seed, 0.5), make_devices(sc), make_plan(sc, seed));
        const auto& m = sim.run_until_complete();
        ASSERT_EQ(m.end_reason, EndReason::Completed) << pattern_name(p) << " n=" << n << " seed " << seed;
        EXPECT_TRUE(m.aggregate_ok) << m.aggregate_detail;
        EXPECT_EQ(compare_with_oracle(p, sim), "") << pattern_name(p) << " n=" << n;
        EXPECT_EQ(m.pairings_completed, static_cast<std::int64_t>(sim.plan().total_actions() / 2));
      }
}

TEST(Executor, OtherOperators) {
  for (AggOp op : {AggOp::Max, AggOp::Count}) {
    EngineConfig c;
    c.cycle = CycleConfig{51, 2, 6, 1.0};
    c.mode = Mode::Aggregate;
    Simulation sim(c, fbtest::presynced_devices(6, 51, {StaticCharging{30}, StaticCharging{90}}),
                   build_plan(Pattern::Tree, 6, 2, 1, op, 4));
    const auto& m = sim.run_until_complete();
    ASSERT_TRUE(m.aggregate_ok) << m.aggregate_detail;
    EXPECT_EQ(compare_with_oracle(Pattern::Tree, sim), "");
    if (op == AggOp::Count) {
      EXPECT_EQ(sim.ledger(5).partials.at({0, 0}).value, 6);
    }
  }
}

TEST(Executor, CollisionFreeOnceSynced) {
  for (Pattern p : {Pattern::Line, Pattern::Tree, Pattern::Ring})
    for (int n : {3, 8}) {
      EngineConfig c;
      c.cycle = CycleConfig{51, 2, n, 1.0};
      c.mode = Mode::Aggregate;
      c.seed = 5;
      Simulation sim(c, fbtest::presynced_devices(n, 51, {UniformCharging{1, 500}}),
                     build_plan(p, n, 2, n, AggOp::Sum, 5));
      const auto& m = sim.run_until_complete();
      ASSERT_TRUE(m.aggregate_ok) << pattern_name(p) << " " << m.aggregate_detail;
      EXPECT_EQ(m.collisions, 0) << pattern_name(p) << " n=" << n;
    }
}

TEST(Executor, TreeReceiverTakesRoundsInOrder) {
  // Device 1 is fast, device 2 slow. Device 3 must still merge 2's round-1
  // partial before 1's round-2 partial.
  const int n = 4;
  EngineConfig c;
  c.cycle = CycleConfig{51, 2, n, 1.0};
  c.mode = Mode::Aggregate;
  c.record_events = true;
  std::vector<DeviceSpec> specs = fbtest::presynced_devices(n, 51, {StaticCharging{5}});
  specs[2].charging = StaticCharging{400};
  specs[3].charging = StaticCharging{20};
  Simulation sim(c, specs, build_plan(Pattern::Tree, n, 3, 1, AggOp::Sum, 2));
  const auto& m = sim.run_until_complete();
  ASSERT_TRUE(m.aggregate_ok) << m.aggregate_detail;
  std::vector<DeviceId> acked_by_3;
  for (const auto& e : sim.events())
    if (e.kind == FrameKind::Ack && e.src == 3 && e.outcome == Outcome::Delivered) acked_by_3.push_back(e.dst);
  EXPECT_EQ(acked_by_3, (std::vector<DeviceId>{2, 1, 2, 1, 2, 1}));
}

TEST(Executor, SurvivesFailures) {
  for (Pattern p : {Pattern::Line, Pattern::Tree, Pattern::Ring})
    for (bool nvm : {false, true})
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        ScenarioConfig sc;
        sc.mode = Mode::Aggregate;
        sc.pattern = p;
        sc.n_devices = 6;
        sc.items_per_device = 2;
        sc.failure_rate = 0.02;
        sc.nvm = nvm;
        sc.slot_limit = 50'000'000;
        Simulation sim(make_engine_config(sc, seed, 0.5), make_devices(sc), make_plan(sc, seed));
        const auto& m = sim.run_until_complete();
        if (!m.completion_slot) continue;
        EXPECT_TRUE(m.aggregate_ok) << m.aggregate_detail;
        EXPECT_EQ(compare_with_oracle(p, sim), "");
      }
}
