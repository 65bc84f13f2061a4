// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "dcsim/calibrate.hpp"
#include "dcsim/scheduler.hpp"
#include "dcsim/simengine.hpp"
#include "dcsim/workload.hpp"
#include "doctest.h"

using namespace dcsim;

namespace {

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  for (const Violation& x : v)
    if (x.code == code) return true;
  return false;
}

// Exhaustive minmax partition: best value, lexicographically earliest cuts.
std::vector<int> brute_partition(const std::vector<double>& w, int k) {
  const int n = static_cast<int>(w.size());
  std::vector<int> cuts(k - 1);
  std::iota(cuts.begin(), cuts.end(), 0);
  std::vector<int> best;
  double best_v = 0.0;
  auto value = [&](const std::vector<int>& c) {
    double v = 0.0, acc = 0.0;
    int next = 0;
    for (int i = 0; i < n; ++i) {
      acc += w[i];
      if (next < static_cast<int>(c.size()) && c[next] == i) {
        v = std::max(v, acc);
        acc = 0.0;
        ++next;
      }
    }
    return std::max(v, acc);
  };
  while (true) {
    double v = value(cuts);
    if (best.empty() || v < best_v) {
      best_v = v;
      best = cuts;
    }
    // Candidates are generated in lexicographic order, so ties keep the
    // earliest cut list.
    int i = k - 2;
    while (i >= 0 && cuts[i] == n - 1 - (k - 1 - i)) --i;
    if (i < 0) break;
    ++cuts[i];
    for (int j = i + 1; j < k - 1; ++j) cuts[j] = cuts[j - 1] + 1;
  }
  return best;
}

// Four units of 10/20/30/40 ms on a zynq-class node, one byte on every
// wire so communication is negligible.
UnitChain toy_chain() {
  UnitChain chain;
  chain.input_bytes = 1;
  const std::int64_t macs[] = {256'000'000, 512'000'000, 768'000'000,
                               1'024'000'000};
  for (int i = 0; i < 4; ++i) {
    Unit u;
    u.unit_id = i;
    u.layer_ids = {i};
    u.macs = macs[i];
    u.boundary_output_bytes = 1;
    chain.units.push_back(u);
  }
  return chain;
}

ClusterSpec toy_cluster(int k) {
  CalibrationParams cal;
  cal.eff_gemm = 1.0;
  cal.eff_alu = 1.0;
  cal.mem_bw = 1e9;
  cal.alpha_msg = 0.0;
  cal.beta_link = 1.25e8;
  cal.gather_overhead = 0.0;
  return make_cluster(Platform::zynq7000, k, cal);
}

}  // namespace

TEST_CASE("partition_minmax worked examples") {
  CHECK(partition_minmax({10, 20, 30, 40}, 1).empty());
  CHECK(partition_minmax({10, 20, 30, 40}, 2) == std::vector<int>{2});
  CHECK(partition_minmax({10, 20, 30, 40}, 3) == std::vector<int>{1, 2});
  CHECK(partition_minmax({10, 20, 30, 40}, 4) == std::vector<int>{0, 1, 2});
  CHECK(partition_minmax({5, 5, 5, 5}, 4) == std::vector<int>{0, 1, 2});
  CHECK(partition_minmax({40, 30, 20, 10}, 2) == std::vector<int>{0});
  // Ties resolve to the earliest cut list.
  CHECK(partition_minmax({3, 1, 1, 3}, 2) == std::vector<int>{1});
  CHECK(partition_minmax({0, 0, 0}, 2) == std::vector<int>{0});
  CHECK(partition_minmax({1}, 1).empty());
}

TEST_CASE("partition_minmax rejects bad k") {
  CHECK_THROWS_AS(partition_minmax({1, 2, 3}, 0), InvalidK);
  CHECK_THROWS_AS(partition_minmax({1, 2, 3}, 4), InvalidK);
  CHECK_THROWS_AS(partition_minmax({}, 1), InvalidK);
}

TEST_CASE("partition_minmax matches the exhaustive oracle") {
  std::mt19937 rng(12345);
  std::uniform_int_distribution<int> len_d(1, 8);
  std::uniform_int_distribution<int> w_d(0, 20);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = len_d(rng);
    std::uniform_int_distribution<int> k_d(1, n);
    const int k = k_d(rng);
    std::vector<double> w(n);
    for (double& x : w) x = w_d(rng);
    INFO("trial ", trial, " n=", n, " k=", k);
    CHECK(partition_minmax(w, k) == brute_partition(w, k));
  }
}

TEST_CASE("pipeline splits the toy chain at the balanced cut") {
  UnitChain chain = toy_chain();
  ClusterSpec cluster = toy_cluster(2);
  Schedule s = schedule_pipeline(chain, cluster);
  CHECK(s.strategy == Strategy::pipeline);
  REQUIRE(s.stage_map.size() == 2);
  CHECK(s.stage_map[0].unit_ids == std::vector<int>{0, 1, 2});
  CHECK(s.stage_map[1].unit_ids == std::vector<int>{3});
  CHECK(s.stage_map[0].replicas.size() == 1);
  CHECK(s.stage_map[1].replicas.size() == 1);
  CHECK(s.round_size == 1);
  CHECK(validate_schedule(s, chain, cluster).empty());
  // Bottleneck stage: 10+20+30 ms of compute.
  CHECK(steady_state(s, chain, cluster) == doctest::Approx(0.060).epsilon(1e-3));
  // scatter, one inter-stage hop, gather.
  CHECK(s.comm_plan.size() == 3);
  CHECK(s.comm_plan[0].cause == MessageCause::scatter);
  CHECK(s.comm_plan[1].cause == MessageCause::inter_stage);
  CHECK(s.comm_plan[2].cause == MessageCause::gather);
}

TEST_CASE("pipeline rejects more nodes than units") {
  UnitChain chain = toy_chain();
  CHECK_THROWS_AS(schedule_pipeline(chain, toy_cluster(5)), TooManyNodes);
  CHECK_NOTHROW(schedule_pipeline(chain, toy_cluster(4)));
}

TEST_CASE("fused replicates the whole toy chain on two nodes") {
  UnitChain chain = toy_chain();
  ClusterSpec cluster = toy_cluster(2);
  Schedule s = schedule_fused(chain, cluster);
  // One cooperating stage at 50 ms beats the best 2-stage pipeline (60 ms).
  REQUIRE(s.stage_map.size() == 1);
  CHECK(s.stage_map[0].replicas.size() == 2);
  CHECK(s.stage_map[0].unit_ids.size() == 4);
  CHECK(validate_schedule(s, chain, cluster).empty());
  CHECK(steady_state(s, chain, cluster) == doctest::Approx(0.050).epsilon(1e-3));
}

TEST_CASE("scatter gather deals rounds across all nodes") {
  UnitChain chain = toy_chain();
  ClusterSpec cluster = toy_cluster(3);
  Schedule s = schedule_scatter_gather(chain, cluster);
  CHECK(s.strategy == Strategy::scatter_gather);
  CHECK(s.round_size == 3);
  REQUIRE(s.stage_map.size() == 1);
  CHECK(s.stage_map[0].replicas.size() == 3);
  CHECK(validate_schedule(s, chain, cluster).empty());
  int scatters = 0, gathers = 0;
  for (const Message& m : s.comm_plan) {
    if (m.cause == MessageCause::scatter) ++scatters;
    if (m.cause == MessageCause::gather) ++gathers;
  }
  CHECK(scatters == 3);
  CHECK(gathers == 3);
  // Compute dominates: 100 ms of work per image across 3 nodes.
  CHECK(steady_state(s, chain, cluster) ==
        doctest::Approx(0.100 / 3).epsilon(1e-3));
}

TEST_CASE("ai core assignment on two nodes cooperates on one stage") {
  UnitChain chain = toy_chain();
  ClusterSpec cluster = toy_cluster(2);
  Schedule s = schedule_ai_core(chain, cluster);
  REQUIRE(s.stage_map.size() == 1);
  CHECK(s.stage_map[0].replicas.size() == 2);
  CHECK(validate_schedule(s, chain, cluster).empty());
  CHECK(steady_state(s, chain, cluster) == doctest::Approx(0.050).epsilon(1e-3));
}

TEST_CASE("all strategies validate on the real workload") {
  UnitChain chain = linearize(build_resnet18());
  for (Platform p : {Platform::zynq7000, Platform::ultrascale_plus}) {
    CalibrationParams cal = builtin_fitted_params(p);
    int max_k = p == Platform::zynq7000 ? 12 : 5;
    for (int k = 1; k <= max_k; ++k) {
      ClusterSpec cluster = make_cluster(p, k, cal);
      INFO(to_string(p), " k=", k);
      CHECK(validate_schedule(schedule_scatter_gather(chain, cluster), chain,
                              cluster)
                .empty());
      CHECK(validate_schedule(schedule_ai_core(chain, cluster), chain, cluster)
                .empty());
      CHECK(validate_schedule(schedule_fused(chain, cluster), chain, cluster)
                .empty());
      if (k <= static_cast<int>(chain.units.size()))
        CHECK(validate_schedule(schedule_pipeline(chain, cluster), chain,
                                cluster)
                  .empty());
    }
  }
}

TEST_CASE("stage maps cover the chain in order without node reuse") {
  UnitChain chain = linearize(build_resnet18());
  ClusterSpec cluster =
      make_cluster(Platform::zynq7000, 7, builtin_fitted_params(Platform::zynq7000));
  for (Schedule s : {schedule_ai_core(chain, cluster),
                     schedule_fused(chain, cluster),
                     schedule_pipeline(chain, cluster)}) {
    std::vector<int> units;
    std::vector<int> nodes;
    for (const Stage& st : s.stage_map) {
      units.insert(units.end(), st.unit_ids.begin(), st.unit_ids.end());
      nodes.insert(nodes.end(), st.replicas.begin(), st.replicas.end());
    }
    std::vector<int> expect(chain.units.size());
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(units == expect);
    std::sort(nodes.begin(), nodes.end());
    CHECK(std::adjacent_find(nodes.begin(), nodes.end()) == nodes.end());
    CHECK(nodes.size() <= cluster.nodes.size());
  }
}

TEST_CASE("validate_schedule flags each defect") {
  UnitChain chain = toy_chain();
  ClusterSpec cluster = toy_cluster(2);
  Schedule good = schedule_pipeline(chain, cluster);

  SUBCASE("empty stage map") {
    Schedule s = good;
    s.stage_map.clear();
    CHECK(has_code(validate_schedule(s, chain, cluster), "EmptyStageMap"));
  }
  SUBCASE("bad round size") {
    Schedule s = good;
    s.round_size = 0;
    CHECK(has_code(validate_schedule(s, chain, cluster), "BadRoundSize"));
  }
  SUBCASE("scatter gather round size must match replica count") {
    Schedule s = schedule_scatter_gather(chain, cluster);
    s.round_size = 5;
    CHECK(has_code(validate_schedule(s, chain, cluster), "BadRoundSize"));
  }
  SUBCASE("uncovered unit") {
    Schedule s = good;
    s.stage_map[1].unit_ids = {};
    auto v = validate_schedule(s, chain, cluster);
    CHECK((has_code(v, "UnitUncovered") || has_code(v, "EmptyStage")));
  }
  SUBCASE("repeated unit") {
    Schedule s = good;
    s.stage_map[1].unit_ids = {2, 3};
    CHECK(has_code(validate_schedule(s, chain, cluster), "UnitRepeated"));
  }
  SUBCASE("stage order broken") {
    Schedule s = good;
    std::swap(s.stage_map[0], s.stage_map[1]);
    s.stage_map[0].stage_id = 0;
    s.stage_map[1].stage_id = 1;
    CHECK(has_code(validate_schedule(s, chain, cluster), "StageOrderBroken"));
  }
  SUBCASE("unknown unit") {
    Schedule s = good;
    s.stage_map[1].unit_ids = {9};
    CHECK(has_code(validate_schedule(s, chain, cluster), "UnknownUnit"));
  }
  SUBCASE("unknown node") {
    Schedule s = good;
    s.stage_map[1].replicas = {7};
    CHECK(has_code(validate_schedule(s, chain, cluster), "UnknownNode"));
  }
  SUBCASE("node reused") {
    Schedule s = good;
    s.stage_map[1].replicas = {0};
    CHECK(has_code(validate_schedule(s, chain, cluster), "NodeReused"));
  }
  SUBCASE("bad message bytes") {
    Schedule s = good;
    s.comm_plan[0].bytes = 0;
    CHECK(has_code(validate_schedule(s, chain, cluster), "BadMessage"));
  }
}

TEST_CASE("greedy refinement metric never regresses") {
  UnitChain chain = linearize(build_resnet18());
  for (Platform p : {Platform::zynq7000, Platform::ultrascale_plus}) {
    CalibrationParams cal = builtin_fitted_params(p);
    int max_k = p == Platform::zynq7000 ? 12 : 5;
    for (int k = 2; k <= max_k; ++k) {
      ClusterSpec cluster = make_cluster(p, k, cal);
      std::vector<double> trace = ai_greedy_metric_trace(chain, cluster);
      REQUIRE(!trace.empty());
      for (std::size_t i = 1; i < trace.size(); ++i) {
        INFO(to_string(p), " k=", k, " step ", i);
        CHECK(trace[i] <= trace[i - 1] + 1e-15);
      }
      Schedule s = schedule_ai_core(chain, cluster);
      CHECK(trace.back() ==
            doctest::Approx(steady_state(s, chain, cluster)).epsilon(1e-12));
    }
  }
}

TEST_CASE("strategy names round trip") {
  for (Strategy s : {Strategy::scatter_gather, Strategy::ai_core_assignment,
                     Strategy::pipeline, Strategy::fused})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK(parse_strategy("sg") == Strategy::scatter_gather);
  CHECK(parse_strategy("scatter-gather") == Strategy::scatter_gather);
  CHECK(parse_strategy("ai-core") == Strategy::ai_core_assignment);
  CHECK_THROWS_AS(parse_strategy("magic"), std::invalid_argument);
}
