// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Placement strategies: each constructor maps a unit chain onto cluster
// nodes and emits the per-round communication plan.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dcsim/hardware.hpp"
#include "dcsim/workload.hpp"

namespace dcsim {

enum class Strategy { scatter_gather, ai_core_assignment, pipeline, fused };

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& s);  // throws std::invalid_argument

// Node id of the master host in message endpoints.
inline constexpr int kMasterNode = -1;

// One pipeline stage: a contiguous run of chain units executed by
// `replicas.size()` nodes. A single-unit stage with several replicas
// round-robins whole images; a multi-unit stage with several replicas
// splits each image's tensors across all of them.
struct Stage {
  int stage_id = -1;
  std::vector<int> unit_ids;
  std::vector<int> replicas;  // worker node ids
};

enum class MessageCause {
  scatter,        // master -> first stage
  inter_stage,    // stage s -> stage s+1
  replica_split,  // stage input fan-out to an extra replica
  replica_merge,  // extra replica fan-in back to the stage output
  gather,         // last stage -> master
};

const char* to_string(MessageCause c);

// One logical transfer per image (or per round image for scatter_gather).
struct Message {
  int from = kMasterNode;
  int to = kMasterNode;
  std::int64_t bytes = 0;
  MessageCause cause = MessageCause::scatter;
};

struct Schedule {
  Strategy strategy = Strategy::scatter_gather;
  std::vector<Stage> stage_map;
  int round_size = 1;  // images in flight per barrier round (scatter_gather)
  std::vector<Message> comm_plan;
};

class InvalidK : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TooManyNodes : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Splits `weights` into k contiguous groups minimizing the maximum group
// sum; among optima returns the lexicographically earliest cut list. Cuts
// are "after index i" positions: [10,20,30,40] with k=2 -> {2}.
// Throws InvalidK unless 1 <= k <= weights.size().
std::vector<int> partition_minmax(const std::vector<double>& weights, int k);

// Every node runs the whole chain; images are dealt out in barrier rounds
// of cluster size.
Schedule schedule_scatter_gather(const UnitChain& chain,
                                 const ClusterSpec& cluster);

// Greedy stage refinement: starting from the whole chain on a cooperating
// pair, repeatedly relieve the bottleneck stage by either splitting its
// unit run or adding a replica, whichever helps throughput more. Once every
// unit has its own stage, remaining nodes replicate the slowest stages.
Schedule schedule_ai_core(const UnitChain& chain, const ClusterSpec& cluster);

// One node per stage, stages cut by minmax over unit compute plus boundary
// transfer weight. Throws TooManyNodes if the cluster has more nodes than
// the chain has units.
Schedule schedule_pipeline(const UnitChain& chain, const ClusterSpec& cluster);

// Pipeline sweep over stage counts with spare nodes used as stage replicas;
// falls back to the ai_core schedule when that is strictly faster.
Schedule schedule_fused(const UnitChain& chain, const ClusterSpec& cluster);

std::vector<Violation> validate_schedule(const Schedule& s,
                                         const UnitChain& chain,
                                         const ClusterSpec& cluster);

// Throughput metric after each greedy ai_core refinement step, for tests.
std::vector<double> ai_greedy_metric_trace(const UnitChain& chain,
                                           const ClusterSpec& cluster);

}  // namespace dcsim
