// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dcsim/simengine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

namespace dcsim {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::image_arrival: return "image_arrival";
    case EventKind::transfer_start: return "transfer_start";
    case EventKind::transfer_end: return "transfer_end";
    case EventKind::compute_start: return "compute_start";
    case EventKind::compute_end: return "compute_end";
  }
  return "unknown";
}

namespace {

std::int64_t span_in_bytes(const UnitChain& chain, int first_unit) {
  return first_unit == 0 ? chain.input_bytes
                         : chain.units[first_unit - 1].boundary_output_bytes;
}

std::int64_t span_out_bytes(const UnitChain& chain, int last_unit) {
  return chain.units[last_unit].boundary_output_bytes;
}

void span_exchange_totals(const UnitChain& chain, int first_unit,
                          int last_unit, std::int64_t* bytes,
                          std::int64_t* msgs) {
  *bytes = 0;
  *msgs = 0;
  for (int u = first_unit; u <= last_unit; ++u) {
    *bytes += chain.units[u].exchange_internal_bytes;
    *msgs += chain.units[u].exchange_internal_msgs;
    if (u > first_unit) {
      *bytes += chain.units[u].exchange_entry_bytes;
      *msgs += chain.units[u].exchange_entry_msgs;
    }
  }
}

double span_compute(const UnitChain& chain, const ClusterSpec& cluster,
                    int first_unit, int last_unit) {
  double c = 0.0;
  for (int u = first_unit; u <= last_unit; ++u)
    c += unit_compute_time(chain.units[u], cluster.nodes.front());
  return c;
}

}  // namespace

double span_exchange_time(const UnitChain& chain, const ClusterSpec& cluster,
                          int first_unit, int last_unit, int replicas) {
  if (replicas <= 1) return 0.0;
  const CalibrationParams& cal = cluster.nodes.front().calibration;
  std::int64_t bytes = 0, msgs = 0;
  span_exchange_totals(chain, first_unit, last_unit, &bytes, &msgs);
  // Each participating tensor is scattered and re-gathered across the
  // group: 2(r-1) messages per layer input, each replica shipping its
  // (r-1)/r share of the bytes both ways.
  return 2.0 * (replicas - 1) * cal.alpha_msg * static_cast<double>(msgs) +
         (2.0 * (replicas - 1) / replicas) * static_cast<double>(bytes) /
             cal.beta_link;
}

double span_service_time(const UnitChain& chain, const ClusterSpec& cluster,
                         int first_unit, int last_unit, int replicas) {
  const CalibrationParams& cal = cluster.nodes.front().calibration;
  double c = span_compute(chain, cluster, first_unit, last_unit);
  double ti = transfer_time(span_in_bytes(chain, first_unit), cal);
  double to = transfer_time(span_out_bytes(chain, last_unit), cal);
  if (replicas == 1 || first_unit == last_unit) {
    // One accelerator per image: transfers overlap compute of other images
    // (whole images round-robin across replicas).
    return std::max(c, ti + to) / replicas;
  }
  // Replicas cooperate on each image; the group advances one image at a
  // time through input transfer, compute, exchanges, output transfer.
  return ti + c / replicas +
         span_exchange_time(chain, cluster, first_unit, last_unit, replicas) +
         to;
}

double stage_service_time(const Stage& stage, const UnitChain& chain,
                          const ClusterSpec& cluster) {
  return span_service_time(chain, cluster, stage.unit_ids.front(),
                           stage.unit_ids.back(),
                           static_cast<int>(stage.replicas.size()));
}

double master_floor_time(const UnitChain& chain, const ClusterSpec& cluster) {
  const CalibrationParams& cal = cluster.nodes.front().calibration;
  return transfer_time(chain.input_bytes, cal) +
         transfer_time(chain.units.back().boundary_output_bytes, cal) +
         cal.gather_overhead;
}

double steady_state(const Schedule& schedule, const UnitChain& chain,
                    const ClusterSpec& cluster) {
  const CalibrationParams& cal = cluster.nodes.front().calibration;
  if (schedule.strategy == Strategy::scatter_gather &&
      schedule.round_size >= 2) {
    const int k = schedule.round_size;
    double c = span_compute(chain, cluster, 0,
                            static_cast<int>(chain.units.size()) - 1);
    double ti = transfer_time(chain.input_bytes, cal);
    double to = transfer_time(chain.units.back().boundary_output_bytes, cal);
    // Barrier round: k serialized sends, computes in parallel, k serialized
    // receives that wait for the send loop to drain.
    double round =
        cal.gather_overhead +
        std::max({k * (ti + to), k * ti + c + to, ti + c + k * to});
    return round / k;
  }
  double v = master_floor_time(chain, cluster);
  for (const Stage& st : schedule.stage_map)
    v = std::max(v, stage_service_time(st, chain, cluster));
  return v;
}

namespace {

enum class StageMode { single, round_robin, tensor_group };

struct StagePlan {
  int a = 0, b = 0;
  std::vector<int> replicas;
  StageMode mode = StageMode::single;
  double ti = 0, to = 0;
  std::int64_t in_bytes = 0, out_bytes = 0;
  double compute = 0;        // per-image accelerator seconds for the span
  double exchange = 0;       // tensor_group only
  std::int64_t ex_msgs = 0;  // per image, tensor_group only
  double ex_wire = 0;        // bytes per image on the wire, tensor_group only
  int group_res = -1;
};

struct Op {
  double dur = 0;
  int res1 = -1, res2 = -1;
  int klass = 1;  // master receives < everything < master sends
  int image = -1, stage = -1;
  int pending = 0;
  double ready = 0;
  std::vector<int> succ;
  bool is_transfer = false;
  bool arrival = false;  // first op of an image, emits image_arrival
  std::int64_t bytes = 0;
  int event_node = kMasterNode;
  std::vector<std::pair<int, double>> util;  // counter -> busy seconds
  double start = -1, end = -1;
};

// Resource/counter layout: 0 = master cpu, 1+n = worker n cpu,
// 1+K+n = worker n accelerator, groups after that (resources only).
struct Build {
  int workers = 0;
  int n_res = 0;
  std::vector<Op> ops;
  double ex_wire_total = 0;
  std::int64_t msg_total = 0;
  std::int64_t wire_total = 0;
  std::vector<int> first_op;  // per image
  std::vector<int> last_op;   // per image

  int master() const { return 0; }
  int cpu(int node) const { return 1 + node; }
  int accel(int node) const { return 1 + workers + node; }

  int add(Op op) {
    ops.push_back(std::move(op));
    return static_cast<int>(ops.size()) - 1;
  }
  void dep(int before, int after) {
    ops[before].succ.push_back(after);
    ++ops[after].pending;
  }
};

void add_cpu_side_util(Build* b, Op* op, int res,
                       const std::vector<int>* group_members, double secs) {
  if (res == b->master()) {
    op->util.push_back({b->master(), secs});
  } else if (group_members) {
    for (int m : *group_members) op->util.push_back({b->cpu(m), secs});
  } else {
    op->util.push_back({res, secs});
  }
}

Build build_streaming(const Schedule& schedule, const UnitChain& chain,
                      const ClusterSpec& cluster, int n_images) {
  const CalibrationParams& cal = cluster.nodes.front().calibration;
  Build b;
  b.workers = static_cast<int>(cluster.nodes.size());
  b.n_res = 1 + 2 * b.workers;

  std::vector<StagePlan> plan;
  for (const Stage& st : schedule.stage_map) {
    StagePlan p;
    p.a = st.unit_ids.front();
    p.b = st.unit_ids.back();
    p.replicas = st.replicas;
    const int r = static_cast<int>(p.replicas.size());
    p.in_bytes = span_in_bytes(chain, p.a);
    p.out_bytes = span_out_bytes(chain, p.b);
    p.ti = transfer_time(p.in_bytes, cal);
    p.to = transfer_time(p.out_bytes, cal);
    double c = span_compute(chain, cluster, p.a, p.b);
    if (r == 1) {
      p.mode = StageMode::single;
      p.compute = c;
    } else if (p.a == p.b) {
      p.mode = StageMode::round_robin;
      p.compute = c;
    } else {
      p.mode = StageMode::tensor_group;
      p.compute = c / r;
      p.exchange = span_exchange_time(chain, cluster, p.a, p.b, r);
      std::int64_t ex_bytes = 0, ex_msgs = 0;
      span_exchange_totals(chain, p.a, p.b, &ex_bytes, &ex_msgs);
      p.ex_msgs = 2 * (r - 1) * ex_msgs;
      p.ex_wire = (2.0 * (r - 1) / r) * static_cast<double>(ex_bytes);
      p.group_res = b.n_res++;
    }
    plan.push_back(std::move(p));
  }
  const int S = static_cast<int>(plan.size());

  auto owner = [&](const StagePlan& p, int image) {
    return p.mode == StageMode::round_robin
               ? p.replicas[image % p.replicas.size()]
               : p.replicas.front();
  };
  // Resource an image's tensor occupies at a stage boundary.
  auto port_res = [&](const StagePlan& p, int image) {
    return p.mode == StageMode::tensor_group ? p.group_res
                                             : b.cpu(owner(p, image));
  };
  auto port_members = [&](const StagePlan& p) {
    return p.mode == StageMode::tensor_group ? &p.replicas : nullptr;
  };

  // Closed-loop admission: the master keeps at most `window` images in
  // flight, dispatching a new one as an old one is gathered. An open loop
  // would pile every image onto the first stage's CPU at once and starve
  // its forwarding sends behind the dispatch backlog.
  int total_replicas = 0;
  for (const StagePlan& p : plan)
    total_replicas += static_cast<int>(p.replicas.size());
  const int window = 2 * total_replicas + 2;

  b.first_op.assign(n_images, -1);
  b.last_op.assign(n_images, -1);
  int prev_overhead = -1;
  for (int i = 0; i < n_images; ++i) {
    int prev_compute = -1;
    for (int s = 0; s < S; ++s) {
      const StagePlan& p = plan[s];
      Op recv;
      recv.dur = p.ti;
      recv.res1 = s == 0 ? b.master() : port_res(plan[s - 1], i);
      recv.res2 = port_res(p, i);
      recv.klass = s == 0 ? 2 : 1;
      recv.image = i;
      recv.stage = s;
      recv.is_transfer = true;
      recv.arrival = s == 0;
      recv.bytes = p.in_bytes;
      recv.event_node = owner(p, i);
      add_cpu_side_util(&b, &recv, recv.res1,
                        s == 0 ? nullptr : port_members(plan[s - 1]), p.ti);
      add_cpu_side_util(&b, &recv, recv.res2, port_members(p), p.ti);
      int rid = b.add(std::move(recv));
      if (s == 0) {
        b.first_op[i] = rid;
        if (i >= window) b.dep(b.last_op[i - window], rid);
      } else {
        b.dep(prev_compute, rid);
      }
      b.wire_total += p.in_bytes;
      ++b.msg_total;

      Op comp;
      comp.dur = p.compute + p.exchange;
      comp.image = i;
      comp.stage = s;
      comp.event_node = owner(p, i);
      if (p.mode == StageMode::tensor_group) {
        comp.res1 = p.group_res;
        for (int m : p.replicas) {
          comp.util.push_back({b.accel(m), p.compute});
          if (p.exchange > 0) comp.util.push_back({b.cpu(m), p.exchange});
        }
        b.ex_wire_total += p.ex_wire;
        b.msg_total += p.ex_msgs;
      } else {
        comp.res1 = b.accel(owner(p, i));
        comp.util.push_back({comp.res1, comp.dur});
      }
      int cid = b.add(std::move(comp));
      b.dep(rid, cid);
      prev_compute = cid;
    }

    const StagePlan& last = plan[S - 1];
    Op gather;
    gather.dur = last.to;
    gather.res1 = port_res(last, i);
    gather.res2 = b.master();
    gather.klass = 0;
    gather.image = i;
    gather.stage = S;
    gather.is_transfer = true;
    gather.bytes = last.out_bytes;
    gather.event_node = kMasterNode;
    add_cpu_side_util(&b, &gather, gather.res1, port_members(last), last.to);
    gather.util.push_back({b.master(), last.to});
    int gid = b.add(std::move(gather));
    b.dep(prev_compute, gid);
    b.wire_total += last.out_bytes;
    ++b.msg_total;

    Op done;
    done.dur = cal.gather_overhead;
    done.res1 = b.master();
    done.klass = 0;
    done.image = i;
    done.stage = S + 1;
    done.util.push_back({b.master(), done.dur});
    int did = b.add(std::move(done));
    b.dep(gid, did);
    if (prev_overhead >= 0) b.dep(prev_overhead, did);
    prev_overhead = did;
    b.last_op[i] = did;
  }
  return b;
}

Build build_rounds(const Schedule& schedule, const UnitChain& chain,
                   const ClusterSpec& cluster, int n_images) {
  const CalibrationParams& cal = cluster.nodes.front().calibration;
  const Stage& st = schedule.stage_map.front();
  const std::vector<int>& nodes = st.replicas;
  const int m = static_cast<int>(nodes.size());
  const double c = span_compute(chain, cluster, st.unit_ids.front(),
                                st.unit_ids.back());
  const std::int64_t in_bytes = chain.input_bytes;
  const std::int64_t out_bytes = chain.units.back().boundary_output_bytes;
  const double ti = transfer_time(in_bytes, cal);
  const double to = transfer_time(out_bytes, cal);

  Build b;
  b.workers = static_cast<int>(cluster.nodes.size());
  b.n_res = 1 + 2 * b.workers;
  b.first_op.assign(n_images, -1);
  b.last_op.assign(n_images, -1);

  int prev_overhead = -1;
  for (int base = 0; base < n_images; base += m) {
    const int count = std::min(m, n_images - base);
    std::vector<int> scat(count), comp(count), gath(count);
    for (int j = 0; j < count; ++j) {
      const int image = base + j;
      const int node = nodes[j];
      Op s;
      s.dur = ti;
      s.res1 = b.master();
      s.res2 = b.cpu(node);
      s.klass = 2;
      s.image = image;
      s.stage = 0;
      s.is_transfer = true;
      s.arrival = true;
      s.bytes = in_bytes;
      s.event_node = node;
      s.util.push_back({b.master(), ti});
      s.util.push_back({b.cpu(node), ti});
      scat[j] = b.add(std::move(s));
      if (prev_overhead >= 0) b.dep(prev_overhead, scat[j]);
      b.first_op[image] = scat[j];
      b.wire_total += in_bytes;
      ++b.msg_total;

      Op k;
      k.dur = c;
      k.res1 = b.accel(node);
      k.image = image;
      k.stage = 0;
      k.event_node = node;
      k.util.push_back({k.res1, c});
      comp[j] = b.add(std::move(k));
      b.dep(scat[j], comp[j]);
    }
    for (int j = 0; j < count; ++j) {
      const int image = base + j;
      const int node = nodes[j];
      Op g;
      g.dur = to;
      g.res1 = b.cpu(node);
      g.res2 = b.master();
      g.klass = 0;
      g.image = image;
      g.stage = 1;
      g.is_transfer = true;
      g.bytes = out_bytes;
      g.event_node = kMasterNode;
      g.util.push_back({b.cpu(node), to});
      g.util.push_back({b.master(), to});
      gath[j] = b.add(std::move(g));
      b.dep(comp[j], gath[j]);
      b.dep(scat[count - 1], gath[j]);  // master drains its send loop first
      if (j > 0) b.dep(gath[j - 1], gath[j]);
      b.last_op[image] = gath[j];
    }
    Op done;
    done.dur = cal.gather_overhead;
    done.res1 = b.master();
    done.klass = 0;
    done.image = base + count - 1;
    done.stage = 2;
    done.util.push_back({b.master(), done.dur});
    int did = b.add(std::move(done));
    b.dep(gath[count - 1], did);
    prev_overhead = did;
  }
  return b;
}

}  // namespace

SimResult simulate(const Schedule& schedule, const UnitChain& chain,
                   const ClusterSpec& cluster, int n_images,
                   std::uint64_t seed, bool with_trace) {
  (void)seed;  // jitter stream reserved; shipped model is deterministic
  if (n_images < 1)
    throw std::invalid_argument("simulate: n_images must be >= 1");
  if (cluster.nodes.empty())
    throw std::invalid_argument("simulate: cluster has no worker nodes");
  {
    auto viol = validate_schedule(schedule, chain, cluster);
    if (!viol.empty())
      throw std::invalid_argument("simulate: invalid schedule: " +
                                  viol[0].code + ": " + viol[0].detail);
  }

  Build b = (schedule.strategy == Strategy::scatter_gather &&
             schedule.round_size >= 2)
                ? build_rounds(schedule, chain, cluster, n_images)
                : build_streaming(schedule, chain, cluster, n_images);

  const int total = static_cast<int>(b.ops.size());
  std::vector<double> free_at(b.n_res, 0.0);
  std::vector<double> busy(1 + 2 * b.workers, 0.0);

  auto est_of = [&](const Op& o) {
    double e = std::max(o.ready, free_at[o.res1]);
    if (o.res2 >= 0) e = std::max(e, free_at[o.res2]);
    return e;
  };

  using Key = std::tuple<double, int, int, int, int>;
  std::priority_queue<Key, std::vector<Key>, std::greater<Key>> heap;
  for (int id = 0; id < total; ++id)
    if (b.ops[id].pending == 0)
      heap.push({est_of(b.ops[id]), b.ops[id].klass, b.ops[id].image,
                 b.ops[id].stage, id});

  SimResult result;
  if (with_trace) result.trace.reserve(2 * total);
  int committed = 0;
  double makespan = 0.0;
  while (committed < total) {
    if (heap.empty())
      throw DeadlockDetected("simulate: pending operations cannot start");
    auto [est, klass, image, stage, id] = heap.top();
    heap.pop();
    Op& o = b.ops[id];
    if (o.start >= 0) continue;
    double cur = est_of(o);
    if (cur > est) {
      heap.push({cur, klass, image, stage, id});
      continue;
    }
    o.start = est;
    o.end = est + o.dur;
    free_at[o.res1] = o.end;
    if (o.res2 >= 0) free_at[o.res2] = o.end;
    for (const auto& share : o.util) busy[share.first] += share.second;
    makespan = std::max(makespan, o.end);
    ++committed;
    if (with_trace) {
      if (o.arrival)
        result.trace.push_back({o.start, EventKind::image_arrival, o.image,
                                o.stage, kMasterNode, 0});
      if (o.is_transfer) {
        result.trace.push_back({o.start, EventKind::transfer_start, o.image,
                                o.stage, o.event_node, o.bytes});
        result.trace.push_back({o.end, EventKind::transfer_end, o.image,
                                o.stage, o.event_node, o.bytes});
      } else if (o.dur > 0 && o.stage >= 0 && o.res1 != 0) {
        result.trace.push_back({o.start, EventKind::compute_start, o.image,
                                o.stage, o.event_node, 0});
        result.trace.push_back({o.end, EventKind::compute_end, o.image,
                                o.stage, o.event_node, 0});
      }
    }
    for (int nxt : o.succ) {
      Op& q = b.ops[nxt];
      q.ready = std::max(q.ready, o.end);
      if (--q.pending == 0)
        heap.push({est_of(q), q.klass, q.image, q.stage, nxt});
    }
  }

  result.per_image_latency.resize(n_images);
  for (int i = 0; i < n_images; ++i)
    result.per_image_latency[i] =
        b.ops[b.last_op[i]].end - b.ops[b.first_op[i]].start;
  result.makespan_s = makespan;
  result.amortized_ms = makespan * 1e3 / n_images;
  result.throughput_ips = n_images / makespan;
  result.node_utilization.resize(b.workers);
  for (int w = 0; w < b.workers; ++w) {
    result.node_utilization[w].cpu_busy_frac = busy[1 + w] / makespan;
    result.node_utilization[w].accel_busy_frac =
        busy[1 + b.workers + w] / makespan;
  }
  result.master_utilization.cpu_busy_frac = busy[0] / makespan;
  result.wire_bytes =
      b.wire_total + static_cast<std::int64_t>(std::llround(b.ex_wire_total));
  result.message_count = b.msg_total;
  if (with_trace)
    std::stable_sort(result.trace.begin(), result.trace.end(),
                     [](const Event& x, const Event& y) {
                       return x.time_s < y.time_s;
                     });
  return result;
}

}  // namespace dcsim
