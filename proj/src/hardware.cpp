// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dcsim/hardware.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcsim {

const char* to_string(Platform p) {
  switch (p) {
    case Platform::zynq7000: return "zynq7000";
    case Platform::ultrascale_plus: return "ultrascale_plus";
  }
  return "unknown";
}

Platform parse_platform(const std::string& s) {
  if (s == "zynq7000" || s == "zynq-7000") return Platform::zynq7000;
  if (s == "ultrascale_plus" || s == "ultrascale-plus")
    return Platform::ultrascale_plus;
  throw std::invalid_argument("unknown platform: " + s);
}

AcceleratorConfig default_accel(Platform p) {
  AcceleratorConfig acc;
  acc.input_width_bits = 8;
  acc.weight_width_bits = 8;
  acc.accum_width_bits = 32;
  acc.batch = 1;
  acc.block_size = 16;
  acc.uop_buffer_bits = 32 * 1024;
  acc.input_buffer_bits = 32 * 1024;
  acc.weight_buffer_bits = 256 * 1024;
  acc.accum_buffer_bits = 128 * 1024;
  acc.clock_hz = p == Platform::zynq7000 ? 1e8 : 3e8;
  return acc;
}

ClusterSpec make_cluster(Platform p, int n_workers,
                         const CalibrationParams& cal) {
  if (n_workers < 1)
    throw std::invalid_argument("make_cluster: need at least one worker");
  ClusterSpec c;
  NodeSpec node;
  node.platform = p;
  node.accel = default_accel(p);
  node.calibration = cal;
  c.nodes.assign(n_workers, node);
  return c;
}

std::vector<Violation> validate_params(const CalibrationParams& cal,
                                       const NetworkSpec& net) {
  std::vector<Violation> out;
  auto positive = [&out](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      out.push_back({"NonpositiveParam", name});
  };
  positive(cal.eff_gemm, "eff_gemm");
  positive(cal.eff_alu, "eff_alu");
  positive(cal.mem_bw, "mem_bw");
  positive(cal.beta_link, "beta_link");
  if (cal.alpha_msg < 0 || !std::isfinite(cal.alpha_msg))
    out.push_back({"NonpositiveParam", "alpha_msg"});
  if (cal.gather_overhead < 0 || !std::isfinite(cal.gather_overhead))
    out.push_back({"NonpositiveParam", "gather_overhead"});
  if (cal.eff_gemm > kMaxEfficiency)
    out.push_back({"EfficiencyOutOfRange", "eff_gemm"});
  if (cal.eff_alu > kMaxEfficiency)
    out.push_back({"EfficiencyOutOfRange", "eff_alu"});
  if (cal.beta_link > net.nominal_link_rate)
    out.push_back({"LinkRateExceedsNominal",
                   "beta_link above nominal_link_rate"});
  return out;
}

double gemm_time(std::int64_t macs, const AcceleratorConfig& acc,
                 const CalibrationParams& cal) {
  double lanes = static_cast<double>(acc.block_size) * acc.block_size *
                 acc.batch;
  return static_cast<double>(macs) / (lanes * acc.clock_hz * cal.eff_gemm);
}

double alu_time(std::int64_t alu_ops, const AcceleratorConfig& acc,
                const CalibrationParams& cal) {
  double lanes = static_cast<double>(acc.block_size) * acc.batch;
  return static_cast<double>(alu_ops) / (lanes * acc.clock_hz * cal.eff_alu);
}

double mem_time(std::int64_t bytes, const CalibrationParams& cal) {
  return static_cast<double>(bytes) / cal.mem_bw;
}

double unit_compute_time(const Unit& u, const NodeSpec& node) {
  double compute = gemm_time(u.macs, node.accel, node.calibration) +
                   alu_time(u.alu_ops, node.accel, node.calibration);
  double dma =
      mem_time(u.weight_bytes + u.boundary_output_bytes, node.calibration);
  return std::max(compute, dma);
}

double transfer_time(std::int64_t bytes, const CalibrationParams& cal) {
  return cal.alpha_msg + static_cast<double>(bytes) / cal.beta_link;
}

}  // namespace dcsim
