// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end. Four subcommands:
//   simulate   run one (platform, strategy, N) experiment through the event
//              engine and emit a one-row result CSV (optional event trace)
//   sweep      predict the full strategies x N steady-state grid and emit
//              both a wide grid CSV and a long-format CSV for plotting
//   calibrate  fit calibration constants against a measured table and write
//              a params file plus a human-readable fit report
//   report     check the calibrated model against the reference tables and
//              print a PASS/FAIL table over the required claims
//
// Exit codes: 0 success, 2 config error, 3 scheduling/simulation error,
// 4 fit divergence, 5 report check failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dcsim/calibrate.hpp"
#include "dcsim/hardware.hpp"
#include "dcsim/scheduler.hpp"
#include "dcsim/simengine.hpp"
#include "dcsim/workload.hpp"

namespace {

using dcsim::CalibrationParams;
using dcsim::Platform;
using dcsim::Strategy;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSim = 3;
constexpr int kExitFit = 4;
constexpr int kExitReport = 5;

// Input/validation problems: flags, config files, params files, workloads.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scheduling or event-engine failures for an otherwise valid config.
class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt6(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.6f", v);
  return b;
}

std::string fmt9(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.9f", v);
  return b;
}

std::string fmt17(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed: " + path);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char b[32];
  std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(v));
  return b;
}

// The checksum covers the effective constants, not file bytes, so builtin
// and file-loaded runs with equal values stamp their outputs identically.
std::string canonical_params(Platform p, const CalibrationParams& c,
                             double nominal_link_rate) {
  std::string s = dcsim::to_string(p);
  s += " eff_gemm=" + fmt17(c.eff_gemm);
  s += " eff_alu=" + fmt17(c.eff_alu);
  s += " mem_bw=" + fmt17(c.mem_bw);
  s += " alpha_msg=" + fmt17(c.alpha_msg);
  s += " beta_link=" + fmt17(c.beta_link);
  s += " gather_overhead=" + fmt17(c.gather_overhead);
  s += " nominal_link_rate=" + fmt17(nominal_link_rate);
  return s;
}

std::string params_checksum(Platform p, const CalibrationParams& c,
                            double nominal_link_rate) {
  return hex16(fnv1a64(canonical_params(p, c, nominal_link_rate)));
}

// ---------------------------------------------------------------------------
// Experiment configuration: defaults, config file, flag overrides.

struct RawConfig {
  std::string platform = "zynq7000";
  bool platform_given = false;
  std::string strategy = "all";
  std::string nodes;  // "", "N" or "A..B"
  long long n_images = 10000;
  std::uint64_t seed = 0;
  std::string workload = "resnet18";
  std::string params = "builtin-fitted";
  std::string out;
  std::string trace;
  bool unrestricted_nodes = false;
};

long long require_integer(const json& v, const std::string& field) {
  if (!v.is_number_integer())
    throw ConfigError("config field \"" + field + "\" must be an integer");
  return v.get<long long>();
}

std::string require_string(const json& v, const std::string& field) {
  if (!v.is_string())
    throw ConfigError("config field \"" + field + "\" must be a string");
  return v.get<std::string>();
}

void load_config_file(const std::string& path, RawConfig* cfg) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(path + ": top level must be an object");
  if (!doc.contains("schema_version"))
    throw ConfigError(path + ": missing required field \"schema_version\"");

  bool saw_n_fpga = false;
  bool saw_n_range = false;
  for (const auto& item : doc.items()) {
    const std::string& key = item.key();
    const json& v = item.value();
    if (key == "schema_version") {
      if (require_integer(v, key) != 1)
        throw ConfigError(path + ": unsupported schema_version (want 1)");
    } else if (key == "platform") {
      cfg->platform = require_string(v, key);
      cfg->platform_given = true;
    } else if (key == "n_fpga") {
      cfg->nodes = std::to_string(require_integer(v, key));
      saw_n_fpga = true;
    } else if (key == "n_range") {
      cfg->nodes = require_string(v, key);
      saw_n_range = true;
    } else if (key == "strategy") {
      cfg->strategy = require_string(v, key);
    } else if (key == "n_images") {
      cfg->n_images = require_integer(v, key);
    } else if (key == "seed") {
      long long s = require_integer(v, key);
      if (s < 0) throw ConfigError(path + ": field \"seed\" must be >= 0");
      cfg->seed = static_cast<std::uint64_t>(s);
    } else if (key == "workload") {
      cfg->workload = require_string(v, key);
    } else if (key == "params") {
      cfg->params = require_string(v, key);
    } else if (key == "out") {
      cfg->out = require_string(v, key);
    } else if (key == "trace") {
      cfg->trace = require_string(v, key);
    } else {
      throw ConfigError(path + ": unknown config field \"" + key + "\"");
    }
  }
  if (saw_n_fpga && saw_n_range)
    throw ConfigError(path + ": give either \"n_fpga\" or \"n_range\", not both");
}

int parse_whole_int(const std::string& s, const std::string& field) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("field \"" + field + "\": not an integer: \"" + s + "\"");
  }
  if (used != s.size())
    throw ConfigError("field \"" + field + "\": not an integer: \"" + s + "\"");
  return v;
}

void parse_node_range(const std::string& s, int* lo, int* hi) {
  auto pos = s.find("..");
  if (pos == std::string::npos) {
    *lo = *hi = parse_whole_int(s, "nodes");
  } else {
    *lo = parse_whole_int(s.substr(0, pos), "nodes");
    *hi = parse_whole_int(s.substr(pos + 2), "nodes");
  }
  if (*lo < 1) throw ConfigError("field \"nodes\": node count must be >= 1");
  if (*hi < *lo) throw ConfigError("field \"nodes\": empty range " + s);
}

int default_node_cap(Platform p) {
  return p == Platform::zynq7000 ? 12 : 5;
}

void check_node_cap(Platform p, int hi, bool unrestricted) {
  int cap = default_node_cap(p);
  if (!unrestricted && hi > cap)
    throw ConfigError("field \"nodes\": N=" + std::to_string(hi) +
                      " exceeds the " + std::string(dcsim::to_string(p)) +
                      " default range 1.." + std::to_string(cap) +
                      " (pass --unrestricted-nodes to lift it)");
}

Platform resolve_platform(const RawConfig& cfg) {
  try {
    return dcsim::parse_platform(cfg.platform);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("field \"platform\": " + std::string(e.what()));
  }
}

std::vector<Strategy> resolve_strategies(const std::string& s) {
  if (s == "all")
    return {Strategy::scatter_gather, Strategy::ai_core_assignment,
            Strategy::pipeline, Strategy::fused};
  try {
    return {dcsim::parse_strategy(s)};
  } catch (const std::invalid_argument& e) {
    throw ConfigError("field \"strategy\": " + std::string(e.what()));
  }
}

dcsim::UnitChain resolve_workload(const std::string& spec) {
  dcsim::ComputationGraph g;
  if (spec == "resnet18") {
    g = dcsim::build_resnet18();
  } else {
    try {
      g = dcsim::graph_from_json(read_file(spec));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(spec + ": " + e.what());
    }
  }
  auto violations = dcsim::validate_graph(g);
  if (!violations.empty()) {
    std::string msg = "workload graph invalid:";
    for (const auto& v : violations) msg += " [" + v.code + "] " + v.detail;
    throw ConfigError(msg);
  }
  try {
    return dcsim::linearize(g);
  } catch (const dcsim::GraphNotLinearizable& e) {
    throw ConfigError("workload graph not linearizable: " + std::string(e.what()));
  }
}

// ---------------------------------------------------------------------------
// Params files.

struct LoadedParams {
  CalibrationParams cal;
  double nominal_link_rate = 125e6;
};

void validate_loaded(Platform p, const LoadedParams& lp) {
  dcsim::NetworkSpec net;
  net.nominal_link_rate = lp.nominal_link_rate;
  auto violations = dcsim::validate_params(lp.cal, net);
  if (!violations.empty()) {
    std::string msg = std::string("params for ") + dcsim::to_string(p) +
                      " invalid:";
    for (const auto& v : violations) msg += " [" + v.code + "] " + v.detail;
    throw ConfigError(msg);
  }
}

LoadedParams params_from_object(const std::string& path, Platform p,
                                const json& obj) {
  if (!obj.is_object())
    throw ConfigError(path + ": platform entry must be an object");
  LoadedParams lp;
  bool seen[6] = {};
  static const char* kNames[6] = {"eff_gemm", "eff_alu",  "mem_bw",
                                  "alpha_msg", "beta_link", "gather_overhead"};
  double* slots[6] = {&lp.cal.eff_gemm,  &lp.cal.eff_alu,
                      &lp.cal.mem_bw,    &lp.cal.alpha_msg,
                      &lp.cal.beta_link, &lp.cal.gather_overhead};
  for (const auto& item : obj.items()) {
    const std::string& key = item.key();
    if (!item.value().is_number())
      throw ConfigError(path + ": field \"" + key + "\" must be a number");
    double v = item.value().get<double>();
    if (key == "nominal_link_rate") {
      lp.nominal_link_rate = v;
      continue;
    }
    bool known = false;
    for (int i = 0; i < 6; ++i) {
      if (key == kNames[i]) {
        *slots[i] = v;
        seen[i] = true;
        known = true;
        break;
      }
    }
    if (!known)
      throw ConfigError(path + ": unknown params field \"" + key + "\"");
  }
  for (int i = 0; i < 6; ++i)
    if (!seen[i])
      throw ConfigError(path + ": missing params field \"" +
                        std::string(kNames[i]) + "\" for " +
                        dcsim::to_string(p));
  validate_loaded(p, lp);
  return lp;
}

// "builtin-fitted" or a params file path. A file may carry either platform
// or both; a missing platform entry falls back to the builtin constants.
LoadedParams resolve_params(const std::string& spec, Platform p) {
  if (spec == "builtin-fitted") {
    LoadedParams lp;
    lp.cal = dcsim::builtin_fitted_params(p);
    return lp;
  }
  json doc;
  try {
    doc = json::parse(read_file(spec));
  } catch (const json::exception& e) {
    throw ConfigError(spec + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(spec + ": top level must be an object");
  if (!doc.contains("schema_version") ||
      !doc["schema_version"].is_number_integer() ||
      doc["schema_version"].get<long long>() != 1)
    throw ConfigError(spec + ": missing or unsupported schema_version (want 1)");
  for (const auto& item : doc.items()) {
    const std::string& key = item.key();
    if (key != "schema_version" && key != "zynq7000" &&
        key != "ultrascale_plus")
      throw ConfigError(spec + ": unknown params field \"" + key + "\"");
  }
  const char* want = dcsim::to_string(p);
  if (!doc.contains(want)) {
    LoadedParams lp;
    lp.cal = dcsim::builtin_fitted_params(p);
    return lp;
  }
  return params_from_object(spec, p, doc[want]);
}

std::string params_to_json(Platform p, const CalibrationParams& c) {
  ordered_json obj;
  obj["eff_gemm"] = c.eff_gemm;
  obj["eff_alu"] = c.eff_alu;
  obj["mem_bw"] = c.mem_bw;
  obj["alpha_msg"] = c.alpha_msg;
  obj["beta_link"] = c.beta_link;
  obj["gather_overhead"] = c.gather_overhead;
  ordered_json doc;
  doc["schema_version"] = 1;
  doc[dcsim::to_string(p)] = obj;
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Shared pieces.

dcsim::ClusterSpec build_cluster(Platform p, int n, const LoadedParams& lp) {
  dcsim::ClusterSpec cluster = dcsim::make_cluster(p, n, lp.cal);
  cluster.network.nominal_link_rate = lp.nominal_link_rate;
  return cluster;
}

dcsim::Schedule build_schedule(Strategy s, const dcsim::UnitChain& chain,
                               const dcsim::ClusterSpec& cluster) {
  try {
    switch (s) {
      case Strategy::scatter_gather:
        return dcsim::schedule_scatter_gather(chain, cluster);
      case Strategy::ai_core_assignment:
        return dcsim::schedule_ai_core(chain, cluster);
      case Strategy::pipeline:
        return dcsim::schedule_pipeline(chain, cluster);
      case Strategy::fused:
        return dcsim::schedule_fused(chain, cluster);
    }
  } catch (const std::exception& e) {
    throw SimError(std::string(dcsim::to_string(s)) + ": " + e.what());
  }
  throw SimError("unknown strategy");
}

dcsim::PredictSpec make_predict_spec(Platform p, const LoadedParams& lp) {
  dcsim::PredictSpec ps;
  ps.platform = p;
  ps.accel = dcsim::default_accel(p);
  ps.params = lp.cal;
  ps.nominal_link_rate = lp.nominal_link_rate;
  return ps;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty())
    std::fputs(text.c_str(), stdout);
  else
    write_file(out, text);
}

double percentile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  auto idx = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(sorted.size())));
  if (idx > 0) --idx;
  if (idx >= sorted.size()) idx = sorted.size() - 1;
  return sorted[idx];
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const RawConfig& cfg) {
  Platform platform = resolve_platform(cfg);
  auto strategies = resolve_strategies(cfg.strategy);
  if (strategies.size() != 1)
    throw ConfigError(
        "field \"strategy\": simulate needs one concrete strategy, not \"all\"");
  Strategy strategy = strategies[0];

  int lo = 1, hi = 1;
  if (!cfg.nodes.empty()) parse_node_range(cfg.nodes, &lo, &hi);
  if (lo != hi)
    throw ConfigError("field \"nodes\": simulate runs a single node count, got " +
                      cfg.nodes);
  check_node_cap(platform, hi, cfg.unrestricted_nodes);
  if (cfg.n_images < 1)
    throw ConfigError("field \"n_images\": must be >= 1");

  dcsim::UnitChain chain = resolve_workload(cfg.workload);
  LoadedParams lp = resolve_params(cfg.params, platform);
  dcsim::ClusterSpec cluster = build_cluster(platform, hi, lp);
  dcsim::Schedule schedule = build_schedule(strategy, chain, cluster);

  dcsim::SimResult res;
  double steady = 0.0;
  try {
    res = dcsim::simulate(schedule, chain, cluster,
                          static_cast<int>(cfg.n_images), cfg.seed,
                          !cfg.trace.empty());
    steady = dcsim::steady_state(schedule, chain, cluster);
  } catch (const std::exception& e) {
    throw SimError(e.what());
  }

  std::vector<double> lat = res.per_image_latency;
  std::sort(lat.begin(), lat.end());
  double mean_accel = 0.0, max_accel = 0.0;
  for (const auto& u : res.node_utilization) {
    mean_accel += u.accel_busy_frac;
    max_accel = std::max(max_accel, u.accel_busy_frac);
  }
  if (!res.node_utilization.empty())
    mean_accel /= static_cast<double>(res.node_utilization.size());

  std::string checksum = params_checksum(platform, lp.cal, lp.nominal_link_rate);
  std::string csv;
  csv += "# dcsim simulate v1\n";
  csv += "# params_checksum " + checksum + "\n";
  csv +=
      "platform,strategy,n_fpga,n_images,seed,amortized_ms,steady_ms,"
      "throughput_ips,makespan_s,wire_bytes,message_count,first_latency_ms,"
      "p50_latency_ms,p99_latency_ms,master_cpu_frac,mean_accel_frac,"
      "max_accel_frac\n";
  csv += std::string(dcsim::to_string(platform)) + "," +
         dcsim::to_string(strategy) + "," + std::to_string(hi) + "," +
         std::to_string(cfg.n_images) + "," + std::to_string(cfg.seed) + "," +
         fmt6(res.amortized_ms) + "," + fmt6(steady * 1e3) + "," +
         fmt6(res.throughput_ips) + "," + fmt6(res.makespan_s) + "," +
         std::to_string(res.wire_bytes) + "," +
         std::to_string(res.message_count) + "," +
         fmt6(res.per_image_latency.front() * 1e3) + "," +
         fmt6(percentile(lat, 0.50) * 1e3) + "," +
         fmt6(percentile(lat, 0.99) * 1e3) + "," +
         fmt6(res.master_utilization.cpu_busy_frac) + "," + fmt6(mean_accel) +
         "," + fmt6(max_accel) + "\n";
  emit(cfg.out, csv);

  if (!cfg.trace.empty()) {
    std::string tcsv;
    tcsv += "# dcsim trace v1\n";
    tcsv += "# params_checksum " + checksum + "\n";
    tcsv += "time_s,kind,image,stage,node,bytes\n";
    for (const auto& ev : res.trace) {
      tcsv += fmt9(ev.time_s) + "," + dcsim::to_string(ev.kind) + "," +
              std::to_string(ev.image) + "," + std::to_string(ev.stage) + "," +
              std::to_string(ev.node) + "," + std::to_string(ev.bytes) + "\n";
    }
    write_file(cfg.trace, tcsv);
  }

  if (!cfg.out.empty()) {
    std::printf("simulate: %s %s N=%d images=%lld -> amortized %s ms (steady %s ms), %s\n",
                dcsim::to_string(platform), dcsim::to_string(strategy), hi,
                cfg.n_images, fmt6(res.amortized_ms).c_str(),
                fmt6(steady * 1e3).c_str(), cfg.out.c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

std::string long_csv_path(const std::string& out) {
  const std::string suffix = ".csv";
  if (out.size() >= suffix.size() &&
      out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0)
    return out.substr(0, out.size() - suffix.size()) + "_long.csv";
  return out + "_long.csv";
}

int cmd_sweep(const RawConfig& cfg) {
  Platform platform = resolve_platform(cfg);
  auto strategies = resolve_strategies(cfg.strategy);

  int lo = 1, hi = default_node_cap(platform);
  if (!cfg.nodes.empty()) parse_node_range(cfg.nodes, &lo, &hi);
  check_node_cap(platform, hi, cfg.unrestricted_nodes);

  dcsim::UnitChain chain = resolve_workload(cfg.workload);
  LoadedParams lp = resolve_params(cfg.params, platform);
  dcsim::PredictSpec ps = make_predict_spec(platform, lp);
  std::string checksum = params_checksum(platform, lp.cal, lp.nominal_link_rate);

  std::map<std::pair<int, int>, double> cell;  // (n, strategy index)
  try {
    for (int n = lo; n <= hi; ++n)
      for (std::size_t i = 0; i < strategies.size(); ++i)
        cell[{n, static_cast<int>(i)}] =
            dcsim::predict_cell(chain, ps, n, strategies[i]);
  } catch (const std::exception& e) {
    throw SimError(e.what());
  }

  std::string grid;
  grid += "# dcsim sweep v1\n";
  grid += std::string("# platform ") + dcsim::to_string(platform) + "\n";
  grid += "# params_checksum " + checksum + "\n";
  grid += "n_fpga";
  for (Strategy s : strategies) grid += std::string(",") + dcsim::to_string(s);
  grid += "\n";
  for (int n = lo; n <= hi; ++n) {
    grid += std::to_string(n);
    for (std::size_t i = 0; i < strategies.size(); ++i)
      grid += "," + fmt6(cell[{n, static_cast<int>(i)}]);
    grid += "\n";
  }

  // Long form, one cell per row, sorted by (strategy name, n).
  std::vector<std::size_t> order(strategies.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::string(dcsim::to_string(strategies[a])) <
           dcsim::to_string(strategies[b]);
  });
  std::string longform;
  longform += "# dcsim sweep v1 (long format)\n";
  longform += "# params_checksum " + checksum + "\n";
  longform += "platform,n_fpga,strategy,predicted_ms\n";
  for (std::size_t i : order)
    for (int n = lo; n <= hi; ++n)
      longform += std::string(dcsim::to_string(platform)) + "," +
                  std::to_string(n) + "," + dcsim::to_string(strategies[i]) +
                  "," + fmt6(cell[{n, static_cast<int>(i)}]) + "\n";

  if (cfg.out.empty()) {
    std::fputs(grid.c_str(), stdout);
    std::fputs("\n", stdout);
    std::fputs(longform.c_str(), stdout);
  } else {
    write_file(cfg.out, grid);
    write_file(long_csv_path(cfg.out), longform);
    std::printf("sweep: %s N=%d..%d -> %s, %s\n", dcsim::to_string(platform),
                lo, hi, cfg.out.c_str(), long_csv_path(cfg.out).c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// calibrate

std::string report_txt_path(const std::string& out) {
  const std::string suffix = ".json";
  if (out.size() >= suffix.size() &&
      out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0)
    return out.substr(0, out.size() - suffix.size()) + "_report.txt";
  return out + "_report.txt";
}

int cmd_calibrate(const RawConfig& cfg, const std::string& measured_path,
                  bool platform_flag_given) {
  Platform platform = resolve_platform(cfg);

  dcsim::MeasuredTable table;
  if (measured_path.empty()) {
    table = dcsim::builtin_measured_table(platform);
  } else {
    try {
      table = dcsim::load_measured_table(measured_path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    bool platform_given = platform_flag_given || cfg.platform_given;
    if (platform_given && table.platform != platform)
      throw ConfigError("measured table is for " +
                        std::string(dcsim::to_string(table.platform)) +
                        " but platform is " + dcsim::to_string(platform));
    platform = table.platform;
  }
  if (table.rows.empty()) throw ConfigError("measured table is empty");

  dcsim::FitReport fit;
  double elapsed = 0.0;
  {
    auto t0 = std::chrono::steady_clock::now();
    fit = dcsim::fit(table, dcsim::default_accel(platform));
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count();
  }

  std::string out = cfg.out.empty() ? "calibrated_params.json" : cfg.out;
  write_file(out, params_to_json(platform, fit.params));

  // Human-readable fit report with the per-cell error matrix.
  std::string checksum = params_checksum(platform, fit.params, 125e6);
  std::ostringstream rep;
  rep << "calibration report: " << dcsim::to_string(platform) << "\n";
  rep << "params_checksum " << checksum << "\n\n";
  rep << "fitted constants\n";
  rep << "  eff_gemm        " << fmt17(fit.params.eff_gemm) << "\n";
  rep << "  eff_alu         " << fmt17(fit.params.eff_alu) << "\n";
  rep << "  mem_bw          " << fmt17(fit.params.mem_bw) << " bytes/s\n";
  rep << "  alpha_msg       " << fmt17(fit.params.alpha_msg) << " s\n";
  rep << "  beta_link       " << fmt17(fit.params.beta_link) << " bytes/s\n";
  rep << "  gather_overhead " << fmt17(fit.params.gather_overhead) << " s\n\n";
  rep << "mean relative error " << fmt6(fit.mean_relative_error * 100.0)
      << "% over " << fit.per_cell_error.size() << " cells, "
      << fit.iterations << " objective evaluations, " << fmt6(elapsed)
      << " s\n\n";
  rep << "per-cell error matrix\n";
  rep << "  n_fpga  strategy            predicted_ms  measured_ms  rel_error\n";
  std::map<Strategy, std::pair<double, int>> by_strategy;
  for (const auto& ce : fit.per_cell_error) {
    char line[160];
    std::snprintf(line, sizeof line, "  %6d  %-18s  %12.6f  %11.6f  %8.3f%%\n",
                  ce.n_fpga, dcsim::to_string(ce.strategy), ce.predicted_ms,
                  ce.measured_ms, ce.rel_error * 100.0);
    rep << line;
    by_strategy[ce.strategy].first += ce.rel_error;
    by_strategy[ce.strategy].second += 1;
  }
  rep << "\nper-strategy mean relative error\n";
  for (const auto& [s, acc] : by_strategy) {
    char line[120];
    std::snprintf(line, sizeof line, "  %-18s  %8.3f%%  (%d cells)\n",
                  dcsim::to_string(s),
                  acc.first / std::max(acc.second, 1) * 100.0, acc.second);
    rep << line;
  }
  write_file(report_txt_path(out), rep.str());

  std::printf("calibrate: %s MRE %s%% over %zu cells -> %s, %s\n",
              dcsim::to_string(platform),
              fmt6(fit.mean_relative_error * 100.0).c_str(),
              fit.per_cell_error.size(), out.c_str(),
              report_txt_path(out).c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

void add_check(std::vector<Check>* checks, const std::string& name, bool pass,
               const std::string& detail) {
  checks->push_back({name, pass, detail});
}

double strategy_mre(const dcsim::MeasuredTable& measured,
                    const dcsim::UnitChain& chain, const dcsim::PredictSpec& ps,
                    Strategy s, int* cells) {
  double sum = 0.0;
  int n = 0;
  for (const auto& row : measured.rows) {
    if (row.strategy != s) continue;
    double pred = dcsim::predict_cell(chain, ps, row.n_fpga, s);
    sum += std::fabs(pred - row.ms) / row.ms;
    ++n;
  }
  *cells = n;
  return n > 0 ? sum / n : 0.0;
}

int cmd_report(const RawConfig& cfg) {
  dcsim::UnitChain chain = resolve_workload(cfg.workload);
  LoadedParams zlp = resolve_params(cfg.params, Platform::zynq7000);
  LoadedParams ulp = resolve_params(cfg.params, Platform::ultrascale_plus);
  dcsim::PredictSpec zps = make_predict_spec(Platform::zynq7000, zlp);
  dcsim::PredictSpec ups = make_predict_spec(Platform::ultrascale_plus, ulp);
  dcsim::MeasuredTable zref = dcsim::builtin_measured_table(Platform::zynq7000);
  dcsim::MeasuredTable uref =
      dcsim::builtin_measured_table(Platform::ultrascale_plus);

  auto zcell = [&](int n, Strategy s) {
    return dcsim::predict_cell(chain, zps, n, s);
  };
  const std::vector<Strategy> all = {Strategy::scatter_gather,
                                     Strategy::ai_core_assignment,
                                     Strategy::pipeline, Strategy::fused};

  std::vector<Check> checks;
  double base = zcell(1, Strategy::scatter_gather);

  {
    double a2 = zcell(2, Strategy::ai_core_assignment);
    double a3 = zcell(3, Strategy::ai_core_assignment);
    add_check(&checks, "ai_core slower than single-node baseline at N=2,3",
              a2 > base && a3 > base,
              "predicted " + fmt6(a2) + " / " + fmt6(a3) + " ms vs baseline " +
                  fmt6(base) + " ms");
  }
  {
    bool ok = true;
    std::string worst;
    for (int n = 2; n <= 6; ++n) {
      double ai = zcell(n, Strategy::ai_core_assignment);
      double other = 0.0;
      for (Strategy s : all)
        if (s != Strategy::ai_core_assignment)
          other = std::max(other, zcell(n, s));
      if (!(ai > other)) {
        ok = false;
        worst = " (fails at N=" + std::to_string(n) + ")";
      }
    }
    add_check(&checks, "ai_core slowest of the four strategies for N in 2..6",
              ok, ok ? "holds at every N" : worst);
  }
  {
    bool ok = true;
    std::string detail;
    for (int n = 10; n <= 12; ++n) {
      double ai = zcell(n, Strategy::ai_core_assignment);
      double other = 1e300;
      for (Strategy s : all)
        if (s != Strategy::ai_core_assignment)
          other = std::min(other, zcell(n, s));
      if (n == 12)
        detail = "N=12 predicted " + fmt6(ai) + " ms vs best other " +
                 fmt6(other) + " ms";
      if (!(ai <= other + 1e-9)) {
        ok = false;
        detail += " (fails at N=" + std::to_string(n) + ")";
      }
    }
    add_check(&checks, "ai_core fastest (ties allowed) for N in 10..12", ok,
              detail);
  }
  {
    bool ok = true;
    double prev = 1e300;
    for (int n = 1; n <= 12; ++n) {
      double v = zcell(n, Strategy::scatter_gather);
      if (!(v < prev)) ok = false;
      prev = v;
    }
    add_check(&checks, "scatter_gather strictly decreasing over N=1..12", ok,
              "N=1 " + fmt6(zcell(1, Strategy::scatter_gather)) + " ms .. N=12 " +
                  fmt6(zcell(12, Strategy::scatter_gather)) + " ms");
  }
  {
    bool ok = true;
    for (int n = 2; n <= 3; ++n) {
      double sg = zcell(n, Strategy::scatter_gather);
      for (Strategy s : all)
        if (s != Strategy::scatter_gather && !(sg < zcell(n, s))) ok = false;
    }
    add_check(&checks, "scatter_gather fastest strategy at N=2 and N=3", ok,
              "N=2 " + fmt6(zcell(2, Strategy::scatter_gather)) + " ms, N=3 " +
                  fmt6(zcell(3, Strategy::scatter_gather)) + " ms");
  }
  double zmre = dcsim::loss(chain, zps, zref);
  add_check(&checks, "zynq7000 mean relative error <= 25%", zmre <= 0.25,
            fmt6(zmre * 100.0) + "% over " + std::to_string(zref.rows.size()) +
                " cells");
  double umre = dcsim::loss(chain, ups, uref);
  add_check(&checks, "ultrascale_plus mean relative error <= 25%", umre <= 0.25,
            fmt6(umre * 100.0) + "% over " + std::to_string(uref.rows.size()) +
                " cells");
  double u1 = dcsim::predict_cell(chain, ups, 1, Strategy::scatter_gather);
  {
    double gap = (1.0 - u1 / base) * 100.0;
    add_check(&checks, "single-node platform gap in 5..9%",
              gap >= 5.0 && gap <= 9.0,
              fmt6(u1) + " ms vs " + fmt6(base) + " ms -> " + fmt6(gap) + "%");
  }
  {
    dcsim::PredictSpec fast = ups;
    fast.accel.clock_hz = 3.5e8;
    double t = dcsim::predict_cell(chain, fast, 1, Strategy::scatter_gather);
    double sp = (1.0 - t / u1) * 100.0;
    add_check(&checks, "ultrascale_plus 300->350 MHz speedup in 3..9%",
              sp >= 3.0 && sp <= 9.0,
              fmt6(u1) + " -> " + fmt6(t) + " ms, " + fmt6(sp) + "%");
  }
  {
    dcsim::PredictSpec wide = ups;
    wide.accel = dcsim::wide_block_accel(ups.accel);
    double t = dcsim::predict_cell(chain, wide, 1, Strategy::scatter_gather);
    double sp = (1.0 - t / u1) * 100.0;
    add_check(&checks,
              "block 32, doubled buffers, 200 MHz speedup in 30..55%",
              sp >= 30.0 && sp <= 55.0,
              fmt6(u1) + " -> " + fmt6(t) + " ms, " + fmt6(sp) + "%");
  }

  std::ostringstream rep;
  rep << "dcsim model report\n";
  rep << "==================\n";
  rep << "params: " << cfg.params << "\n";
  rep << "zynq7000        params_checksum "
      << params_checksum(Platform::zynq7000, zlp.cal, zlp.nominal_link_rate)
      << "\n";
  rep << "ultrascale_plus params_checksum "
      << params_checksum(Platform::ultrascale_plus, ulp.cal,
                         ulp.nominal_link_rate)
      << "\n\n";
  rep << "required checks\n";
  int failed = 0;
  for (const auto& c : checks) {
    if (!c.pass) ++failed;
    rep << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << ": "
        << c.detail << "\n";
  }
  rep << "\nper-strategy mean relative error\n";
  struct {
    const char* label;
    const dcsim::MeasuredTable* ref;
    const dcsim::PredictSpec* ps;
  } plats[2] = {{"zynq7000", &zref, &zps}, {"ultrascale_plus", &uref, &ups}};
  for (const auto& pl : plats) {
    rep << "  " << pl.label << "\n";
    for (Strategy s : all) {
      int cells = 0;
      double mre = strategy_mre(*pl.ref, chain, *pl.ps, s, &cells);
      char line[120];
      std::snprintf(line, sizeof line, "    %-18s  %8.3f%%  (%d cells)\n",
                    dcsim::to_string(s), mre * 100.0, cells);
      rep << line;
    }
  }
  rep << "\nresult: " << (failed == 0 ? "PASS" : "FAIL") << " ("
      << (checks.size() - failed) << "/" << checks.size()
      << " required checks passed)\n";

  std::fputs(rep.str().c_str(), stdout);
  if (!cfg.out.empty()) write_file(cfg.out, rep.str());
  return failed == 0 ? kExitOk : kExitReport;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dcsim: deterministic cluster scheduling simulator"};
  app.require_subcommand(1);

  RawConfig cfg;
  std::string config_path;
  std::string flag_platform, flag_strategy, flag_nodes, flag_workload;
  std::string flag_params, flag_out, flag_trace, flag_measured;
  long long flag_images = 0;
  std::uint64_t flag_seed = 0;

  auto add_common = [&](CLI::App* sub, bool with_trace) {
    sub->add_option("--config", config_path, "experiment config JSON");
    sub->add_option("--platform", flag_platform,
                    "zynq7000 or ultrascale-plus");
    sub->add_option("--strategy", flag_strategy,
                    "scatter-gather, ai-core, pipeline, fused or all");
    sub->add_option("--nodes", flag_nodes, "node count N or range A..B");
    sub->add_option("--images", flag_images, "images per run");
    sub->add_option("--seed", flag_seed, "jitter stream seed");
    sub->add_option("--workload", flag_workload,
                    "resnet18 or path to a graph JSON");
    sub->add_option("--params", flag_params,
                    "params JSON path or builtin-fitted");
    sub->add_option("--out", flag_out, "output path");
    sub->add_flag("--unrestricted-nodes", cfg.unrestricted_nodes,
                  "lift the per-platform node range cap");
    if (with_trace)
      sub->add_option("--trace", flag_trace, "event trace CSV path");
  };

  CLI::App* sim = app.add_subcommand("simulate", "run one experiment");
  add_common(sim, true);
  CLI::App* sweep = app.add_subcommand("sweep", "predict a strategies x N grid");
  add_common(sweep, false);
  CLI::App* cal = app.add_subcommand("calibrate", "fit params to a table");
  add_common(cal, false);
  cal->add_option("--measured", flag_measured,
                  "measured table CSV (default: bundled table)");
  CLI::App* rpt = app.add_subcommand("report", "check model against references");
  add_common(rpt, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (!config_path.empty()) load_config_file(config_path, &cfg);

    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--platform")) {
      cfg.platform = flag_platform;
      cfg.platform_given = true;
    }
    if (sub->count("--strategy")) cfg.strategy = flag_strategy;
    if (sub->count("--nodes")) cfg.nodes = flag_nodes;
    if (sub->count("--images")) cfg.n_images = flag_images;
    if (sub->count("--seed")) cfg.seed = flag_seed;
    if (sub->count("--workload")) cfg.workload = flag_workload;
    if (sub->count("--params")) cfg.params = flag_params;
    if (sub->count("--out")) cfg.out = flag_out;
    if (sub == sim && sim->count("--trace")) cfg.trace = flag_trace;

    if (sub == sim) return cmd_simulate(cfg);
    if (sub == sweep) return cmd_sweep(cfg);
    if (sub == cal)
      return cmd_calibrate(cfg, flag_measured, cal->count("--platform") > 0);
    return cmd_report(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const dcsim::FitDiverged& e) {
    std::fprintf(stderr, "fit diverged: %s\n", e.what());
    return kExitFit;
  } catch (const SimError& e) {
    std::fprintf(stderr, "simulation error: %s\n", e.what());
    return kExitSim;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSim;
  }
}
