// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic discrete-event execution of a schedule, plus the closed-form
// steady-state throughput model the schedulers optimize against.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcsim/scheduler.hpp"

namespace dcsim {

enum class EventKind {
  image_arrival,
  transfer_start,
  transfer_end,
  compute_start,
  compute_end,
};

const char* to_string(EventKind k);

struct Event {
  double time_s = 0.0;
  EventKind kind = EventKind::image_arrival;
  int image = -1;
  int stage = -1;
  int node = kMasterNode;   // owning resource's node (master for overhead)
  std::int64_t bytes = 0;   // transfers only
};

struct NodeUtilization {
  double accel_busy_frac = 0.0;
  double cpu_busy_frac = 0.0;
};

struct SimResult {
  std::vector<double> per_image_latency;  // dispatch to gathered, seconds
  double makespan_s = 0.0;
  double amortized_ms = 0.0;  // makespan / n_images, in ms
  double throughput_ips = 0.0;
  std::vector<NodeUtilization> node_utilization;  // per worker node
  NodeUtilization master_utilization;
  std::int64_t wire_bytes = 0;
  std::int64_t message_count = 0;
  std::vector<Event> trace;  // only populated when requested
};

class DeadlockDetected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs n_images through the schedule. All images are available at t=0;
// every transfer occupies both endpoint CPUs for its whole duration; a
// node's accelerator runs concurrently with its CPU; the master serializes
// its own sends, receives and per-image gather bookkeeping. `seed` selects
// the jitter stream; the shipped model is jitter-free, so results are
// identical across seeds. Set with_trace to collect the event log.
SimResult simulate(const Schedule& schedule, const UnitChain& chain,
                   const ClusterSpec& cluster, int n_images,
                   std::uint64_t seed = 0, bool with_trace = false);

// Closed-form steady-state time per image (seconds) of the same execution
// the event loop converges to for large n.
double steady_state(const Schedule& schedule, const UnitChain& chain,
                    const ClusterSpec& cluster);

// Per-image service time of one stage: compute over the replica group,
// plus the stage input/output transfers and the intra-group tensor
// exchanges when replicas cooperate on a single image.
double stage_service_time(const Stage& stage, const UnitChain& chain,
                          const ClusterSpec& cluster);

// Span-level forms of the same model, for schedulers probing candidate
// stages without materializing Stage objects. Units first..last inclusive.
double span_service_time(const UnitChain& chain, const ClusterSpec& cluster,
                         int first_unit, int last_unit, int replicas);
double span_exchange_time(const UnitChain& chain, const ClusterSpec& cluster,
                          int first_unit, int last_unit, int replicas);

// Master occupancy per image: dispatch send, result receive, bookkeeping.
double master_floor_time(const UnitChain& chain, const ClusterSpec& cluster);

}  // namespace dcsim
