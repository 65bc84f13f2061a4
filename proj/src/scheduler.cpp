// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dcsim/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dcsim/simengine.hpp"

namespace dcsim {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::scatter_gather: return "scatter_gather";
    case Strategy::ai_core_assignment: return "ai_core_assignment";
    case Strategy::pipeline: return "pipeline";
    case Strategy::fused: return "fused";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "scatter_gather" || s == "scatter-gather" || s == "sg")
    return Strategy::scatter_gather;
  if (s == "ai_core_assignment" || s == "ai-core-assignment" ||
      s == "ai_core" || s == "ai-core")
    return Strategy::ai_core_assignment;
  if (s == "pipeline") return Strategy::pipeline;
  if (s == "fused") return Strategy::fused;
  throw std::invalid_argument("unknown strategy: " + s);
}

const char* to_string(MessageCause c) {
  switch (c) {
    case MessageCause::scatter: return "scatter";
    case MessageCause::inter_stage: return "inter_stage";
    case MessageCause::replica_split: return "replica_split";
    case MessageCause::replica_merge: return "replica_merge";
    case MessageCause::gather: return "gather";
  }
  return "unknown";
}

std::vector<int> partition_minmax(const std::vector<double>& weights, int k) {
  const int n = static_cast<int>(weights.size());
  if (k < 1 || k > n)
    throw InvalidK("partition_minmax: k = " + std::to_string(k) + " with " +
                   std::to_string(n) + " weights");
  std::vector<double> prefix(n + 1, 0.0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + weights[i];

  const double inf = std::numeric_limits<double>::infinity();
  // f[g][i]: minimal max group sum over the first i weights in g groups.
  std::vector<std::vector<double>> f(k + 1, std::vector<double>(n + 1, inf));
  f[0][0] = 0.0;
  for (int g = 1; g <= k; ++g)
    for (int i = g; i <= n; ++i)
      for (int j = g - 1; j < i; ++j)
        f[g][i] = std::min(f[g][i],
                           std::max(f[g - 1][j], prefix[i] - prefix[j]));
  const double value = f[k][n];
  const double eps = 1e-12 * std::max(1.0, value);

  // Fewest groups that cover weights[start..) without exceeding value.
  auto min_groups = [&](int start) {
    int groups = 0;
    int i = start;
    while (i < n) {
      ++groups;
      double s = 0.0;
      do {
        s += weights[i];
        ++i;
      } while (i < n && s + weights[i] <= value + eps);
    }
    return groups;
  };

  // Earliest feasible end for each group in turn gives the
  // lexicographically smallest optimal cut list.
  std::vector<int> cuts;
  int start = 0;
  for (int remaining = k; remaining > 1; --remaining) {
    double s = 0.0;
    int m = start;
    while (true) {
      s += weights[m];
      if (s <= value + eps && n - (m + 1) >= remaining - 1 &&
          min_groups(m + 1) <= remaining - 1)
        break;
      ++m;
    }
    cuts.push_back(m);
    start = m + 1;
  }
  return cuts;
}

namespace {

struct Span {
  int a = 0;
  int b = 0;
  int r = 1;
};

std::vector<double> unit_costs(const UnitChain& chain,
                               const ClusterSpec& cluster) {
  std::vector<double> c(chain.units.size());
  for (std::size_t u = 0; u < chain.units.size(); ++u)
    c[u] = unit_compute_time(chain.units[u], cluster.nodes.front());
  return c;
}

double span_svc(const UnitChain& chain, const ClusterSpec& cluster,
                const Span& s) {
  return span_service_time(chain, cluster, s.a, s.b, s.r);
}

double steady_of_spans(const UnitChain& chain, const ClusterSpec& cluster,
                       const std::vector<Span>& spans) {
  double v = master_floor_time(chain, cluster);
  for (const Span& s : spans)
    v = std::max(v, span_svc(chain, cluster, s));
  return v;
}

// Greedy bottleneck refinement shared by ai_core and its metric trace.
std::vector<Span> ai_spans(const UnitChain& chain, const ClusterSpec& cluster,
                           std::vector<double>* trace) {
  const int U = static_cast<int>(chain.units.size());
  const int K = static_cast<int>(cluster.nodes.size());
  std::vector<double> c = unit_costs(chain, cluster);
  auto svc = [&](const Span& s) { return span_svc(chain, cluster, s); };
  auto record = [&](const std::vector<Span>& spans) {
    if (trace) trace->push_back(steady_of_spans(chain, cluster, spans));
  };
  auto bottleneck = [&](const std::vector<Span>& spans) {
    int bi = 0;
    double bv = svc(spans[0]);
    for (int i = 1; i < static_cast<int>(spans.size()); ++i) {
      double v = svc(spans[i]);
      if (v > bv) {
        bv = v;
        bi = i;
      }
    }
    return bi;
  };

  std::vector<Span> spans;
  if (K == 1) {
    spans = {{0, U - 1, 1}};
    record(spans);
    return spans;
  }
  if (K >= U) {
    for (int u = 0; u < U; ++u) spans.push_back({u, u, 1});
    record(spans);
    for (int extra = K - U; extra > 0; --extra) {
      spans[bottleneck(spans)].r += 1;
      record(spans);
    }
    return spans;
  }

  spans = {{0, U - 1, 2}};
  record(spans);
  for (int used = 2; used < K; ++used) {
    const int bi = bottleneck(spans);
    const Span s = spans[bi];

    std::vector<Span> repl = spans;
    repl[bi].r += 1;
    if (s.a == s.b) {
      spans = std::move(repl);
      record(spans);
      continue;
    }
    double bb_repl = steady_of_spans(chain, cluster, repl);

    std::vector<double> bare(c.begin() + s.a, c.begin() + s.b + 1);
    int m = s.a + partition_minmax(bare, 2)[0];
    double wl = std::accumulate(c.begin() + s.a, c.begin() + m + 1, 0.0);
    double wr = std::accumulate(c.begin() + m + 1, c.begin() + s.b + 1, 0.0);
    const int total = s.r + 1;
    const int heavy = total - total / 2;
    const int light = total / 2;
    Span left{s.a, m, wl >= wr ? heavy : light};
    Span right{m + 1, s.b, wl >= wr ? light : heavy};
    std::vector<Span> split = spans;
    split[bi] = left;
    split.insert(split.begin() + bi + 1, right);
    double bb_split = steady_of_spans(chain, cluster, split);

    // A tie keeps the split: more stages leave the next iteration options.
    spans = bb_repl < bb_split - 1e-15 ? std::move(repl) : std::move(split);
    record(spans);
  }
  return spans;
}

Schedule materialize(Strategy strat, const UnitChain& chain,
                     const std::vector<Span>& spans, int round_size) {
  Schedule s;
  s.strategy = strat;
  s.round_size = round_size;
  int node = 0;
  for (int i = 0; i < static_cast<int>(spans.size()); ++i) {
    Stage st;
    st.stage_id = i;
    for (int u = spans[i].a; u <= spans[i].b; ++u) st.unit_ids.push_back(u);
    for (int r = 0; r < spans[i].r; ++r) st.replicas.push_back(node++);
    s.stage_map.push_back(std::move(st));
  }

  auto in_bytes = [&](const Span& sp) {
    return sp.a == 0 ? chain.input_bytes
                     : chain.units[sp.a - 1].boundary_output_bytes;
  };
  auto out_bytes = [&](const Span& sp) {
    return chain.units[sp.b].boundary_output_bytes;
  };

  if (strat == Strategy::scatter_gather) {
    const Span& whole = spans.front();
    for (int j : s.stage_map.front().replicas)
      s.comm_plan.push_back(
          {kMasterNode, j, in_bytes(whole), MessageCause::scatter});
    for (int j : s.stage_map.front().replicas)
      s.comm_plan.push_back(
          {j, kMasterNode, out_bytes(whole), MessageCause::gather});
    return s;
  }

  s.comm_plan.push_back({kMasterNode, s.stage_map.front().replicas.front(),
                         in_bytes(spans.front()), MessageCause::scatter});
  for (int i = 0; i < static_cast<int>(spans.size()); ++i) {
    const Stage& st = s.stage_map[i];
    for (std::size_t j = 1; j < st.replicas.size(); ++j)
      s.comm_plan.push_back({st.replicas.front(), st.replicas[j],
                             in_bytes(spans[i]), MessageCause::replica_split});
    for (std::size_t j = 1; j < st.replicas.size(); ++j)
      s.comm_plan.push_back({st.replicas[j], st.replicas.front(),
                             out_bytes(spans[i]), MessageCause::replica_merge});
    if (i + 1 < static_cast<int>(spans.size()))
      s.comm_plan.push_back({st.replicas.front(),
                             s.stage_map[i + 1].replicas.front(),
                             out_bytes(spans[i]), MessageCause::inter_stage});
  }
  s.comm_plan.push_back({s.stage_map.back().replicas.front(), kMasterNode,
                         out_bytes(spans.back()), MessageCause::gather});
  return s;
}

void require_workers(const ClusterSpec& cluster) {
  if (cluster.nodes.empty())
    throw std::invalid_argument("cluster has no worker nodes");
}

std::vector<double> pipeline_weights(const UnitChain& chain,
                                     const ClusterSpec& cluster) {
  const CalibrationParams& cal = cluster.nodes.front().calibration;
  std::vector<double> w = unit_costs(chain, cluster);
  for (std::size_t u = 0; u < w.size(); ++u)
    w[u] += transfer_time(chain.units[u].boundary_output_bytes, cal);
  return w;
}

std::vector<Span> spans_from_cuts(const std::vector<int>& cuts, int n_units) {
  std::vector<Span> spans;
  int a = 0;
  for (int cut : cuts) {
    spans.push_back({a, cut, 1});
    a = cut + 1;
  }
  spans.push_back({a, n_units - 1, 1});
  return spans;
}

}  // namespace

Schedule schedule_scatter_gather(const UnitChain& chain,
                                 const ClusterSpec& cluster) {
  require_workers(cluster);
  const int K = static_cast<int>(cluster.nodes.size());
  const int U = static_cast<int>(chain.units.size());
  return materialize(Strategy::scatter_gather, chain, {{0, U - 1, K}}, K);
}

Schedule schedule_ai_core(const UnitChain& chain, const ClusterSpec& cluster) {
  require_workers(cluster);
  return materialize(Strategy::ai_core_assignment, chain,
                     ai_spans(chain, cluster, nullptr), 1);
}

std::vector<double> ai_greedy_metric_trace(const UnitChain& chain,
                                           const ClusterSpec& cluster) {
  require_workers(cluster);
  std::vector<double> trace;
  ai_spans(chain, cluster, &trace);
  return trace;
}

Schedule schedule_pipeline(const UnitChain& chain, const ClusterSpec& cluster) {
  require_workers(cluster);
  const int K = static_cast<int>(cluster.nodes.size());
  const int U = static_cast<int>(chain.units.size());
  if (K > U)
    throw TooManyNodes("pipeline needs at most " + std::to_string(U) +
                       " nodes for " + std::to_string(U) + " units, got " +
                       std::to_string(K));
  auto cuts = partition_minmax(pipeline_weights(chain, cluster), K);
  return materialize(Strategy::pipeline, chain, spans_from_cuts(cuts, U), 1);
}

Schedule schedule_fused(const UnitChain& chain, const ClusterSpec& cluster) {
  require_workers(cluster);
  const int K = static_cast<int>(cluster.nodes.size());
  const int U = static_cast<int>(chain.units.size());
  std::vector<double> w = pipeline_weights(chain, cluster);
  auto svc = [&](const Span& s) { return span_svc(chain, cluster, s); };

  double best_v = std::numeric_limits<double>::infinity();
  std::vector<Span> best;
  for (int S = 1; S <= std::min(K, U); ++S) {
    std::vector<Span> spans = spans_from_cuts(partition_minmax(w, S), U);
    for (int spare = K - S; spare > 0; --spare) {
      std::vector<int> order(spans.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int x, int y) {
        double sx = svc(spans[x]), sy = svc(spans[y]);
        if (sx != sy) return sx > sy;
        return x < y;
      });
      bool placed = false;
      for (int j : order) {
        double cur = svc(spans[j]);
        Span probe = spans[j];
        probe.r += 1;
        if (svc(probe) < cur - 1e-15) {
          spans[j].r += 1;
          placed = true;
          break;
        }
      }
      if (!placed) break;
    }
    double v = steady_of_spans(chain, cluster, spans);
    if (v < best_v - 1e-12) {
      best_v = v;
      best = std::move(spans);
    }
  }

  std::vector<Span> ai = ai_spans(chain, cluster, nullptr);
  if (steady_of_spans(chain, cluster, ai) < best_v)
    return materialize(Strategy::fused, chain, ai, 1);
  return materialize(Strategy::fused, chain, best, 1);
}

std::vector<Violation> validate_schedule(const Schedule& s,
                                         const UnitChain& chain,
                                         const ClusterSpec& cluster) {
  std::vector<Violation> out;
  const int U = static_cast<int>(chain.units.size());
  const int K = static_cast<int>(cluster.nodes.size());
  if (s.stage_map.empty()) {
    out.push_back({"EmptyStageMap", "schedule has no stages"});
    return out;
  }
  if (s.round_size < 1)
    out.push_back({"BadRoundSize", std::to_string(s.round_size)});

  std::vector<int> covered(U, 0);
  std::vector<int> node_uses(K, 0);
  int expected = 0;
  bool ordered = true;
  int total_replicas = 0;
  for (int i = 0; i < static_cast<int>(s.stage_map.size()); ++i) {
    const Stage& st = s.stage_map[i];
    if (st.stage_id != i)
      out.push_back({"BadStageId", "stage at position " + std::to_string(i) +
                                   " has id " + std::to_string(st.stage_id)});
    if (st.unit_ids.empty())
      out.push_back({"EmptyStage", "stage " + std::to_string(i) +
                                   " covers no units"});
    for (int u : st.unit_ids) {
      if (u < 0 || u >= U) {
        out.push_back({"UnknownUnit", "unit " + std::to_string(u)});
        continue;
      }
      ++covered[u];
      if (u != expected) ordered = false;
      ++expected;
    }
    if (st.replicas.empty())
      out.push_back({"EmptyStage", "stage " + std::to_string(i) +
                                   " has no replicas"});
    for (int nid : st.replicas) {
      if (nid < 0 || nid >= K) {
        out.push_back({"UnknownNode", "node " + std::to_string(nid)});
        continue;
      }
      ++node_uses[nid];
      ++total_replicas;
    }
  }
  for (int u = 0; u < U; ++u) {
    if (covered[u] == 0)
      out.push_back({"UnitUncovered", "unit " + std::to_string(u)});
    if (covered[u] > 1)
      out.push_back({"UnitRepeated", "unit " + std::to_string(u)});
  }
  if (!ordered && expected == U)
    out.push_back({"StageOrderBroken", "units not in chain order"});
  for (int nid = 0; nid < K; ++nid)
    if (node_uses[nid] > 1)
      out.push_back({"NodeReused", "node " + std::to_string(nid) +
                                   " serves several stages"});
  if (s.strategy == Strategy::scatter_gather && s.round_size != total_replicas)
    out.push_back({"BadRoundSize",
                   "scatter_gather round_size must equal worker count"});
  for (const Message& m : s.comm_plan) {
    auto known = [&](int nid) { return nid == kMasterNode || (nid >= 0 && nid < K); };
    if (!known(m.from) || !known(m.to))
      out.push_back({"UnknownNode", "message endpoint"});
    if (m.bytes <= 0)
      out.push_back({"BadMessage", "message with nonpositive bytes"});
  }
  return out;
}

}  // namespace dcsim
