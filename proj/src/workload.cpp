// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "dcsim/workload.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <unordered_map>

#include "json.hpp"

namespace dcsim {
namespace {

using json = nlohmann::json;

// Layers whose output elements each depend on many input elements. A replica
// group cooperating on one image must redistribute such a layer's input.
bool is_mixing(LayerKind k) {
  return k == LayerKind::conv2d || k == LayerKind::dense ||
         k == LayerKind::pool;
}

// Kahn topological sort, smallest id first. Returns indices into g.layers;
// empty if the graph has a cycle.
std::vector<int> topo_order(const ComputationGraph& g,
                            const std::unordered_map<int, int>& index_of) {
  const int n = static_cast<int>(g.layers.size());
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (int i = 0; i < n; ++i) {
    for (int p : g.layers[i].preds) {
      auto it = index_of.find(p);
      if (it == index_of.end()) return {};
      succ[it->second].push_back(i);
      ++indeg[i];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<int>> q;
  for (int i = 0; i < n; ++i)
    if (indeg[i] == 0) q.push(i);
  std::vector<int> order;
  order.reserve(n);
  while (!q.empty()) {
    int u = q.top();
    q.pop();
    order.push_back(u);
    for (int v : succ[u])
      if (--indeg[v] == 0) q.push(v);
  }
  if (static_cast<int>(order.size()) != n) return {};
  return order;
}

std::unordered_map<int, int> build_index(const ComputationGraph& g) {
  std::unordered_map<int, int> m;
  for (int i = 0; i < static_cast<int>(g.layers.size()); ++i)
    m.emplace(g.layers[i].id, i);
  return m;
}

}  // namespace

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::pool: return "pool";
    case LayerKind::elementwise_add: return "elementwise_add";
    case LayerKind::activation: return "activation";
    case LayerKind::batchnorm_folded: return "batchnorm_folded";
  }
  return "unknown";
}

LayerKind parse_layer_kind(const std::string& s) {
  if (s == "conv2d") return LayerKind::conv2d;
  if (s == "dense") return LayerKind::dense;
  if (s == "pool") return LayerKind::pool;
  if (s == "elementwise_add") return LayerKind::elementwise_add;
  if (s == "activation") return LayerKind::activation;
  if (s == "batchnorm_folded") return LayerKind::batchnorm_folded;
  throw std::invalid_argument("unknown layer kind: " + s);
}

ComputationGraph build_resnet18(int input_h, int input_w, int input_c) {
  if (input_h < 32 || input_w < 32 || input_c < 1)
    throw std::invalid_argument("build_resnet18: input must be at least 32x32x1");

  ComputationGraph g;
  g.input_bytes =
      static_cast<std::int64_t>(input_h) * input_w * input_c;

  // accum_resident: the only consumer is the residual add, so the tensor
  // stays at accumulator width (4 bytes/element) instead of 1.
  auto add_layer = [&g](LayerKind kind, std::int64_t macs, std::int64_t alu,
                        std::int64_t weights, std::int64_t out_elems,
                        bool accum_resident, std::vector<int> preds) {
    LayerNode n;
    n.id = static_cast<int>(g.layers.size());
    n.kind = kind;
    n.macs = macs;
    n.alu_ops = alu;
    n.weight_bytes = weights;
    n.output_bytes = out_elems * (accum_resident ? 4 : 1);
    n.preds = std::move(preds);
    int id = n.id;
    g.layers.push_back(std::move(n));
    return id;
  };

  // All stem/stride-2 windows use standard ResNet padding, so each one
  // exactly halves the spatial extent (rounding up).
  auto half = [](int v) { return (v - 1) / 2 + 1; };

  int h = half(input_h), w = half(input_w);
  std::int64_t hw = static_cast<std::int64_t>(h) * w;
  int conv1 = add_layer(LayerKind::conv2d, 49LL * input_c * 64 * hw, 0,
                        49LL * input_c * 64, 64 * hw, false, {});
  int relu1 = add_layer(LayerKind::activation, 0, 64 * hw, 0, 64 * hw, false,
                        {conv1});
  h = half(h);
  w = half(w);
  hw = static_cast<std::int64_t>(h) * w;
  int prev = add_layer(LayerKind::pool, 0, 64 * hw, 0, 64 * hw, false, {relu1});

  struct BlockCfg {
    int cin, cout, stride;
  };
  const BlockCfg blocks[8] = {{64, 64, 1},    {64, 64, 1},   {64, 128, 2},
                              {128, 128, 1},  {128, 256, 2}, {256, 256, 1},
                              {256, 512, 2},  {512, 512, 1}};

  for (const BlockCfg& b : blocks) {
    int block_in = prev;
    if (b.stride == 2) {
      h = half(h);
      w = half(w);
      hw = static_cast<std::int64_t>(h) * w;
    }
    int c1 = add_layer(LayerKind::conv2d, 9LL * b.cin * b.cout * hw, 0,
                       9LL * b.cin * b.cout, b.cout * hw, false, {block_in});
    int r1 = add_layer(LayerKind::activation, 0, b.cout * hw, 0, b.cout * hw,
                       false, {c1});
    int c2 = add_layer(LayerKind::conv2d, 9LL * b.cout * b.cout * hw, 0,
                       9LL * b.cout * b.cout, b.cout * hw, true, {r1});
    int shortcut = block_in;
    if (b.stride == 2 || b.cin != b.cout) {
      shortcut = add_layer(LayerKind::conv2d,
                           static_cast<std::int64_t>(b.cin) * b.cout * hw, 0,
                           static_cast<std::int64_t>(b.cin) * b.cout,
                           b.cout * hw, true, {block_in});
    }
    int sum = add_layer(LayerKind::elementwise_add, 0, b.cout * hw, 0,
                        b.cout * hw, false, {c2, shortcut});
    prev = add_layer(LayerKind::activation, 0, b.cout * hw, 0, b.cout * hw,
                     false, {sum});
  }

  int pool = add_layer(LayerKind::pool, 0, 512, 0, 512, false, {prev});
  add_layer(LayerKind::dense, 512LL * 1000, 0, 512LL * 1000, 1000, false,
            {pool});
  return g;
}

std::vector<Violation> validate_graph(const ComputationGraph& g) {
  std::vector<Violation> out;
  if (g.layers.empty()) {
    out.push_back({"EmptyGraph", "graph has no layers"});
    return out;
  }
  if (g.input_bytes <= 0)
    out.push_back({"NonpositiveInputBytes",
                   "input_bytes = " + std::to_string(g.input_bytes)});

  std::unordered_map<int, int> index_of;
  for (int i = 0; i < static_cast<int>(g.layers.size()); ++i) {
    const LayerNode& l = g.layers[i];
    if (!index_of.emplace(l.id, i).second)
      out.push_back({"DuplicateId", "layer id " + std::to_string(l.id)});
  }

  bool refs_ok = true;
  for (const LayerNode& l : g.layers) {
    const std::string tag = "layer " + std::to_string(l.id);
    for (int p : l.preds) {
      if (p == l.id || !index_of.count(p)) {
        out.push_back({"BadPredRef",
                       tag + " references layer " + std::to_string(p)});
        refs_ok = false;
      }
    }
    if (l.macs < 0 || l.alu_ops < 0 || l.weight_bytes < 0)
      out.push_back({"NegativeCost", tag});
    if (l.output_bytes <= 0)
      out.push_back({"NonpositiveOutputBytes", tag});
    switch (l.kind) {
      case LayerKind::conv2d:
      case LayerKind::dense:
        if (l.macs <= 0)
          out.push_back({"KindCostMismatch", tag + ": " +
                         std::string(to_string(l.kind)) + " needs macs > 0"});
        break;
      case LayerKind::pool:
      case LayerKind::elementwise_add:
      case LayerKind::activation:
        if (l.macs != 0 || l.alu_ops <= 0)
          out.push_back({"KindCostMismatch", tag + ": " +
                         std::string(to_string(l.kind)) +
                         " needs macs = 0 and alu_ops > 0"});
        break;
      case LayerKind::batchnorm_folded:
        break;
    }
  }
  if (!refs_ok) return out;

  if (topo_order(g, index_of).empty()) {
    out.push_back({"CycleDetected", "graph has a dependency cycle"});
    return out;
  }

  std::unordered_map<int, int> out_deg;
  int sources = 0;
  for (const LayerNode& l : g.layers) {
    if (l.preds.empty()) ++sources;
    for (int p : l.preds) ++out_deg[p];
  }
  int sinks = 0;
  for (const LayerNode& l : g.layers)
    if (out_deg[l.id] == 0) ++sinks;
  if (sources == 0) out.push_back({"NoSource", "every layer has preds"});
  if (sources > 1)
    out.push_back({"MultipleSources", std::to_string(sources) + " sources"});
  if (sinks == 0) out.push_back({"NoSink", "every layer has successors"});
  if (sinks > 1)
    out.push_back({"MultipleSinks", std::to_string(sinks) + " sinks"});
  return out;
}

UnitChain linearize(const ComputationGraph& g) {
  {
    auto viol = validate_graph(g);
    if (!viol.empty())
      throw GraphNotLinearizable("invalid graph: " + viol[0].code + ": " +
                                 viol[0].detail);
  }
  const int n = static_cast<int>(g.layers.size());
  auto index_of = build_index(g);
  std::vector<int> order = topo_order(g, index_of);
  std::vector<int> pos(n);
  for (int p = 0; p < n; ++p) pos[order[p]] = p;

  // A layer is an articulation point of the chain iff no edge jumps over
  // its topological position: every path from source to sink passes it.
  std::vector<int> max_to(n, -1);
  for (int i = 0; i < n; ++i)
    for (int p : g.layers[i].preds) {
      int pu = pos[index_of[p]];
      max_to[pu] = std::max(max_to[pu], pos[i]);
    }
  std::vector<std::vector<int>> segments;
  {
    std::vector<int> cur;
    int run = -1;
    for (int p = 0; p < n; ++p) {
      cur.push_back(order[p]);
      if (run <= p) {
        segments.push_back(cur);
        cur.clear();
      }
      run = std::max(run, max_to[p]);
    }
    if (!cur.empty())
      throw GraphNotLinearizable("graph does not end at an articulation layer");
  }

  // Multi-layer segments (the residual bodies) are atomic units. A single
  // layer joins the unit before it only when that unit is still a plain run,
  // or when it is the activation requantizing the body's output.
  std::vector<std::vector<int>> members;
  std::vector<char> has_core;
  for (const auto& seg : segments) {
    const bool multi = seg.size() > 1;
    bool start_new = members.empty() || multi ||
                     (has_core.back() &&
                      g.layers[seg[0]].kind != LayerKind::activation);
    if (start_new) {
      members.push_back(seg);
      has_core.push_back(multi);
    } else {
      members.back().push_back(seg[0]);
    }
  }

  std::vector<int> unit_of(n, -1);
  for (int u = 0; u < static_cast<int>(members.size()); ++u)
    for (int idx : members[u]) unit_of[idx] = u;
  for (int i = 0; i < n; ++i)
    for (int p : g.layers[i].preds) {
      int ua = unit_of[index_of[p]], ub = unit_of[i];
      if (ub != ua && ub != ua + 1)
        throw GraphNotLinearizable(
            "edge " + std::to_string(p) + " -> " +
            std::to_string(g.layers[i].id) + " skips a unit");
    }

  UnitChain chain;
  chain.input_bytes = g.input_bytes;
  for (int u = 0; u < static_cast<int>(members.size()); ++u) {
    Unit unit;
    unit.unit_id = u;
    for (int idx : members[u]) {
      const LayerNode& l = g.layers[idx];
      unit.layer_ids.push_back(l.id);
      unit.macs += l.macs;
      unit.alu_ops += l.alu_ops;
      unit.weight_bytes += l.weight_bytes;
      if (is_mixing(l.kind)) {
        for (int p : l.preds) {
          const LayerNode& src = g.layers[index_of[p]];
          if (unit_of[index_of[p]] == u) {
            unit.exchange_internal_bytes += src.output_bytes;
            unit.exchange_internal_msgs += 1;
          } else {
            unit.exchange_entry_bytes += src.output_bytes;
            unit.exchange_entry_msgs += 1;
          }
        }
      }
    }
    unit.boundary_output_bytes = g.layers[members[u].back()].output_bytes;
    chain.units.push_back(std::move(unit));
  }
  return chain;
}

std::string graph_to_json(const ComputationGraph& g) {
  json j;
  j["schema_version"] = 1;
  j["input_bytes"] = g.input_bytes;
  json layers = json::array();
  for (const LayerNode& l : g.layers) {
    json e;
    e["id"] = l.id;
    e["kind"] = to_string(l.kind);
    e["macs"] = l.macs;
    e["alu_ops"] = l.alu_ops;
    e["weight_bytes"] = l.weight_bytes;
    e["output_bytes"] = l.output_bytes;
    e["preds"] = l.preds;
    layers.push_back(std::move(e));
  }
  j["layers"] = std::move(layers);
  return j.dump(2) + "\n";
}

ComputationGraph graph_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("graph JSON parse error: ") +
                                e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("graph JSON must be an object");
  static const std::set<std::string> kTop = {"schema_version", "input_bytes",
                                             "layers"};
  static const std::set<std::string> kLayer = {
      "id", "kind", "macs", "alu_ops", "weight_bytes", "output_bytes", "preds"};
  for (const auto& item : j.items())
    if (!kTop.count(item.key()))
      throw std::invalid_argument("graph JSON: unknown field \"" + item.key() +
                                  "\"");
  if (j.contains("schema_version") && j["schema_version"].get<int>() != 1)
    throw std::invalid_argument("graph JSON: unsupported schema_version");
  if (!j.contains("input_bytes") || !j.contains("layers"))
    throw std::invalid_argument("graph JSON: input_bytes and layers required");

  try {
    ComputationGraph g;
    g.input_bytes = j["input_bytes"].get<std::int64_t>();
    for (const json& e : j["layers"]) {
      for (const auto& item : e.items())
        if (!kLayer.count(item.key()))
          throw std::invalid_argument("graph JSON: unknown layer field \"" +
                                      item.key() + "\"");
      LayerNode l;
      l.id = e.at("id").get<int>();
      l.kind = parse_layer_kind(e.at("kind").get<std::string>());
      l.macs = e.at("macs").get<std::int64_t>();
      l.alu_ops = e.at("alu_ops").get<std::int64_t>();
      l.weight_bytes = e.at("weight_bytes").get<std::int64_t>();
      l.output_bytes = e.at("output_bytes").get<std::int64_t>();
      l.preds = e.at("preds").get<std::vector<int>>();
      g.layers.push_back(std::move(l));
    }
    return g;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("graph JSON: ") + e.what());
  }
}

}  // namespace dcsim
