// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Fits the calibration constants against a measured strategy/size table and
// predicts such tables from fitted parameters.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dcsim/scheduler.hpp"
#include "dcsim/workload.hpp"

namespace dcsim {

struct MeasuredCell {
  int n_fpga = 1;
  Strategy strategy = Strategy::scatter_gather;
  double ms = 0.0;
};

struct MeasuredTable {
  Platform platform = Platform::zynq7000;
  std::vector<MeasuredCell> rows;
};

struct CellError {
  int n_fpga = 1;
  Strategy strategy = Strategy::scatter_gather;
  double predicted_ms = 0.0;
  double measured_ms = 0.0;
  double rel_error = 0.0;
};

struct FitReport {
  CalibrationParams params;
  double mean_relative_error = 0.0;
  std::vector<CellError> per_cell_error;
  int iterations = 0;                  // objective evaluations
  std::vector<double> objective_trace;  // best-so-far, nonincreasing
};

class FitDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Execution-time tables of the two reference cluster deployments,
// milliseconds per image. Also shipped as CSV files under data/.
MeasuredTable builtin_measured_table(Platform p);

// CSV: header "platform,n_fpga,strategy,ms", '#' comment lines allowed.
MeasuredTable load_measured_table(const std::string& path);
std::string measured_table_to_csv(const MeasuredTable& t);

// Everything a prediction depends on besides the workload.
struct PredictSpec {
  Platform platform = Platform::zynq7000;
  AcceleratorConfig accel;
  CalibrationParams params;
  double nominal_link_rate = 125e6;
};

ClusterSpec predict_cluster(const PredictSpec& ps, int n_workers);

// Alternative synthesis point: doubled GEMM tile, doubled buffers, 200 MHz.
AcceleratorConfig wide_block_accel(const AcceleratorConfig& base);

// Steady-state ms/image for one cluster size and strategy. Pipeline wider
// than the chain is evaluated at its best feasible depth, extra nodes idle.
double predict_cell(const UnitChain& chain, const PredictSpec& ps, int n,
                    Strategy strategy);

MeasuredTable predict_table(const UnitChain& chain, const PredictSpec& ps,
                            int n_lo, int n_hi,
                            const std::vector<Strategy>& strategies);

// Mean relative error of predictions against the table's cells.
double loss(const UnitChain& chain, const PredictSpec& ps,
            const MeasuredTable& table);

// Re-derives eff_gemm so the single-node prediction matches `target_ms`
// exactly; the remaining params stay as given. Throws FitDiverged when no
// efficiency in (0, kMaxEfficiency] reaches the target.
double anchor_eff_gemm(const UnitChain& chain, const PredictSpec& ps,
                       double target_ms);

// Coarse grid over the free message/memory/ALU constants followed by
// accept-only multiplicative descent, re-anchoring eff_gemm at every probe
// so the single-node column is always exact.
FitReport fit(const MeasuredTable& table, const AcceleratorConfig& accel,
              double nominal_link_rate = 125e6);

// Constants produced by fit() on the builtin tables, compiled in so the
// CLI works without a params file.
CalibrationParams builtin_fitted_params(Platform p);

}  // namespace dcsim
