// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Cluster and accelerator descriptions plus the calibrated cost primitives
// every higher layer builds on: roofline compute time per unit and
// latency/bandwidth transfer time per message.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcsim/workload.hpp"

namespace dcsim {

enum class Platform { zynq7000, ultrascale_plus };

const char* to_string(Platform p);
Platform parse_platform(const std::string& s);  // throws std::invalid_argument

struct AcceleratorConfig {
  double clock_hz = 1e8;
  int input_width_bits = 8;
  int weight_width_bits = 8;
  int accum_width_bits = 32;
  int batch = 1;
  int block_size = 16;
  std::int64_t uop_buffer_bits = 32 * 1024;
  std::int64_t input_buffer_bits = 32 * 1024;
  std::int64_t weight_buffer_bits = 256 * 1024;
  std::int64_t accum_buffer_bits = 128 * 1024;
};

// Fitted per-deployment constants. The efficiency factors are effective
// throughput ratios against the nominal block_size^2 (GEMM) and block_size
// (ALU) lanes-per-cycle rates; values above 1 absorb kernel-level batching
// the op counts do not see. alpha_msg/beta_link shape one message as
// alpha + bytes/beta; gather_overhead is the master's per-image bookkeeping.
struct CalibrationParams {
  double eff_gemm = 1.0;
  double eff_alu = 1.0;
  double mem_bw = 1e9;         // bytes/s
  double alpha_msg = 1e-4;     // s
  double beta_link = 1.25e8;   // bytes/s
  double gather_overhead = 1e-4;  // s
};

// Efficiency factors are capped well above 1: they normalize against a
// conservative op count, not a physical peak.
inline constexpr double kMaxEfficiency = 8.0;

struct NetworkSpec {
  double nominal_link_rate = 125e6;  // bytes/s, 1 Gbit/s Ethernet
  bool nonblocking_switch = true;    // links contend pairwise only
  bool serialize_at_master = true;   // master NIC handles one message at a time
};

struct NodeSpec {
  Platform platform = Platform::zynq7000;
  AcceleratorConfig accel;
  CalibrationParams calibration;
};

// Worker nodes only; the master is an implicit host with no accelerator
// that shares the workers' message-cost constants.
struct ClusterSpec {
  std::vector<NodeSpec> nodes;
  NetworkSpec network;
};

AcceleratorConfig default_accel(Platform p);
ClusterSpec make_cluster(Platform p, int n_workers,
                         const CalibrationParams& cal);

// Empty result iff params are usable with this network.
std::vector<Violation> validate_params(const CalibrationParams& cal,
                                       const NetworkSpec& net);

double gemm_time(std::int64_t macs, const AcceleratorConfig& acc,
                 const CalibrationParams& cal);
double alu_time(std::int64_t alu_ops, const AcceleratorConfig& acc,
                const CalibrationParams& cal);
double mem_time(std::int64_t bytes, const CalibrationParams& cal);

// Roofline: compute (GEMM and ALU issue serially) overlapped with the DMA
// traffic the unit cannot keep on chip, its weights plus boundary output.
double unit_compute_time(const Unit& u, const NodeSpec& node);

double transfer_time(std::int64_t bytes, const CalibrationParams& cal);

}  // namespace dcsim
