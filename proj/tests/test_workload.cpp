// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "dcsim/workload.hpp"
#include "doctest.h"

using namespace dcsim;

namespace {

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  return std::any_of(v.begin(), v.end(),
                     [&](const Violation& x) { return x.code == code; });
}

LayerNode layer(int id, LayerKind kind, std::int64_t macs, std::int64_t alu,
                std::int64_t wb, std::int64_t ob, std::vector<int> preds) {
  LayerNode l;
  l.id = id;
  l.kind = kind;
  l.macs = macs;
  l.alu_ops = alu;
  l.weight_bytes = wb;
  l.output_bytes = ob;
  l.preds = std::move(preds);
  return l;
}

}  // namespace

TEST_CASE("resnet18 graph shape and stem costs") {
  ComputationGraph g = build_resnet18();
  CHECK(g.layers.size() == 48);
  CHECK(g.input_bytes == 224 * 224 * 3);
  CHECK(validate_graph(g).empty());

  // First conv: 7x7x3 kernel, 64 filters, 112x112 output positions.
  const LayerNode& conv1 = g.layers.front();
  CHECK(conv1.kind == LayerKind::conv2d);
  CHECK(conv1.macs == 118013952);
  CHECK(conv1.macs == 49LL * 3 * 64 * 112 * 112);
  CHECK(conv1.weight_bytes == 9408);

  const LayerNode& fc = g.layers.back();
  CHECK(fc.kind == LayerKind::dense);
  CHECK(fc.macs == 512000);
  CHECK(fc.weight_bytes == 512000);
  CHECK(fc.output_bytes == 1000);
}

TEST_CASE("resnet18 linearizes into ten units with frozen aggregates") {
  UnitChain chain = linearize(build_resnet18());
  REQUIRE(chain.units.size() == 10);
  CHECK(chain.input_bytes == 150528);

  const std::vector<std::size_t> layer_counts = {3, 5, 5, 6, 5, 6, 5, 6, 5, 2};
  const std::vector<std::int64_t> macs = {
      118013952, 231211008, 231211008, 179830784, 231211008,
      179830784, 231211008, 179830784, 231211008, 512000};
  const std::vector<std::int64_t> alu = {1003520, 602112, 602112, 301056,
                                         301056,  150528, 150528, 75264,
                                         75264,   512};
  const std::vector<std::int64_t> weights = {9408,    73728,   73728,  229376,
                                             294912,  917504,  1179648,
                                             3670016, 4718592, 512000};
  const std::vector<std::int64_t> boundary = {200704, 200704, 200704, 100352,
                                              100352, 50176,  50176,  25088,
                                              25088,  1000};
  const std::vector<std::int64_t> ex_int_b = {802816, 200704, 200704, 100352,
                                              100352, 50176,  50176,  25088,
                                              25088,  512};
  const std::vector<std::int64_t> ex_ent_b = {0,      200704, 200704, 401408,
                                              100352, 200704, 50176,  100352,
                                              25088,  25088};
  const std::vector<std::int64_t> ex_ent_m = {0, 1, 1, 2, 1, 2, 1, 2, 1, 1};

  for (std::size_t i = 0; i < 10; ++i) {
    INFO("unit ", i);
    const Unit& u = chain.units[i];
    CHECK(u.unit_id == static_cast<int>(i));
    CHECK(u.layer_ids.size() == layer_counts[i]);
    CHECK(u.macs == macs[i]);
    CHECK(u.alu_ops == alu[i]);
    CHECK(u.weight_bytes == weights[i]);
    CHECK(u.boundary_output_bytes == boundary[i]);
    CHECK(u.exchange_internal_bytes == ex_int_b[i]);
    CHECK(u.exchange_internal_msgs == 1);
    CHECK(u.exchange_entry_bytes == ex_ent_b[i]);
    CHECK(u.exchange_entry_msgs == ex_ent_m[i]);
  }

  // Unit aggregates conserve the graph totals.
  ComputationGraph g = build_resnet18();
  auto sum_graph = [&](auto field) {
    return std::accumulate(g.layers.begin(), g.layers.end(), std::int64_t{0},
                           [&](std::int64_t a, const LayerNode& l) {
                             return a + field(l);
                           });
  };
  auto sum_units = [&](auto field) {
    return std::accumulate(chain.units.begin(), chain.units.end(),
                           std::int64_t{0}, [&](std::int64_t a, const Unit& u) {
                             return a + field(u);
                           });
  };
  CHECK(sum_graph([](const LayerNode& l) { return l.macs; }) ==
        sum_units([](const Unit& u) { return u.macs; }));
  CHECK(sum_graph([](const LayerNode& l) { return l.alu_ops; }) ==
        sum_units([](const Unit& u) { return u.alu_ops; }));
  CHECK(sum_graph([](const LayerNode& l) { return l.weight_bytes; }) ==
        sum_units([](const Unit& u) { return u.weight_bytes; }));

  std::size_t total_layers = 0;
  for (const Unit& u : chain.units) total_layers += u.layer_ids.size();
  CHECK(total_layers == g.layers.size());
}

TEST_CASE("input size scales stem cost quadratically") {
  ComputationGraph small = build_resnet18(112, 112, 3);
  ComputationGraph big = build_resnet18(224, 224, 3);
  CHECK(big.layers.front().macs == 4 * small.layers.front().macs);
  CHECK(big.input_bytes == 4 * small.input_bytes);
}

TEST_CASE("validator flags each defect class") {
  SUBCASE("empty graph") {
    ComputationGraph g;
    g.input_bytes = 1;
    CHECK(has_code(validate_graph(g), "EmptyGraph"));
  }
  SUBCASE("nonpositive input bytes") {
    ComputationGraph g;
    g.input_bytes = 0;
    g.layers.push_back(layer(0, LayerKind::conv2d, 10, 0, 1, 1, {}));
    CHECK(has_code(validate_graph(g), "NonpositiveInputBytes"));
  }
  SUBCASE("duplicate id") {
    ComputationGraph g;
    g.input_bytes = 1;
    g.layers.push_back(layer(0, LayerKind::conv2d, 10, 0, 1, 1, {}));
    g.layers.push_back(layer(0, LayerKind::activation, 0, 1, 0, 1, {0}));
    CHECK(has_code(validate_graph(g), "DuplicateId"));
  }
  SUBCASE("dangling pred reference") {
    ComputationGraph g;
    g.input_bytes = 1;
    g.layers.push_back(layer(0, LayerKind::conv2d, 10, 0, 1, 1, {7}));
    CHECK(has_code(validate_graph(g), "BadPredRef"));
  }
  SUBCASE("negative cost") {
    ComputationGraph g;
    g.input_bytes = 1;
    g.layers.push_back(layer(0, LayerKind::conv2d, -1, 0, 1, 1, {}));
    CHECK(has_code(validate_graph(g), "NegativeCost"));
  }
  SUBCASE("nonpositive output bytes") {
    ComputationGraph g;
    g.input_bytes = 1;
    g.layers.push_back(layer(0, LayerKind::conv2d, 10, 0, 1, 0, {}));
    CHECK(has_code(validate_graph(g), "NonpositiveOutputBytes"));
  }
  SUBCASE("kind and costs disagree") {
    ComputationGraph g;
    g.input_bytes = 1;
    g.layers.push_back(layer(0, LayerKind::activation, 10, 0, 0, 1, {}));
    CHECK(has_code(validate_graph(g), "KindCostMismatch"));
  }
  SUBCASE("cycle") {
    ComputationGraph g;
    g.input_bytes = 1;
    g.layers.push_back(layer(0, LayerKind::conv2d, 10, 0, 1, 1, {1}));
    g.layers.push_back(layer(1, LayerKind::conv2d, 10, 0, 1, 1, {0}));
    auto v = validate_graph(g);
    CHECK(has_code(v, "CycleDetected"));
  }
  SUBCASE("multiple sources and sinks") {
    ComputationGraph g;
    g.input_bytes = 1;
    g.layers.push_back(layer(0, LayerKind::conv2d, 10, 0, 1, 1, {}));
    g.layers.push_back(layer(1, LayerKind::conv2d, 10, 0, 1, 1, {}));
    auto v = validate_graph(g);
    CHECK(has_code(v, "MultipleSources"));
    CHECK(has_code(v, "MultipleSinks"));
  }
  SUBCASE("resnet18 mutations are caught") {
    ComputationGraph g = build_resnet18();
    g.layers[5].preds.push_back(999);
    CHECK(has_code(validate_graph(g), "BadPredRef"));
  }
}

TEST_CASE("linearize rejects invalid graphs") {
  ComputationGraph g;
  g.input_bytes = 1;
  g.layers.push_back(layer(0, LayerKind::conv2d, 10, 0, 1, 1, {1}));
  g.layers.push_back(layer(1, LayerKind::conv2d, 10, 0, 1, 1, {0}));
  CHECK_THROWS_AS(linearize(g), GraphNotLinearizable);
}

TEST_CASE("single layer graph becomes one unit") {
  ComputationGraph g;
  g.input_bytes = 100;
  g.layers.push_back(layer(0, LayerKind::conv2d, 1000, 0, 64, 32, {}));
  UnitChain chain = linearize(g);
  REQUIRE(chain.units.size() == 1);
  CHECK(chain.units[0].macs == 1000);
  CHECK(chain.units[0].boundary_output_bytes == 32);
  CHECK(chain.units[0].exchange_entry_bytes == 0);
  CHECK(chain.units[0].exchange_internal_bytes == 0);
  CHECK(chain.input_bytes == 100);
}

TEST_CASE("plain chain groups runs of single layers") {
  // A run of plain single layers is one unit; the second conv's input comes
  // from inside it, so its redistribution is an internal exchange.
  ComputationGraph g;
  g.input_bytes = 10;
  g.layers.push_back(layer(0, LayerKind::conv2d, 100, 0, 8, 16, {}));
  g.layers.push_back(layer(1, LayerKind::activation, 0, 16, 0, 16, {0}));
  g.layers.push_back(layer(2, LayerKind::conv2d, 200, 0, 8, 4, {1}));
  UnitChain chain = linearize(g);
  REQUIRE(chain.units.size() == 1);
  CHECK(chain.units[0].layer_ids == std::vector<int>{0, 1, 2});
  CHECK(chain.units[0].boundary_output_bytes == 4);
  CHECK(chain.units[0].exchange_internal_bytes == 16);
  CHECK(chain.units[0].exchange_internal_msgs == 1);
  CHECK(chain.units[0].exchange_entry_msgs == 0);
}

TEST_CASE("layers after a residual body start a fresh unit") {
  // Body 1..3, its requantizing activation 4, then a conv. The activation
  // joins the body's unit; the conv does not.
  ComputationGraph g;
  g.input_bytes = 10;
  g.layers.push_back(layer(0, LayerKind::conv2d, 100, 0, 8, 16, {}));
  g.layers.push_back(layer(1, LayerKind::conv2d, 100, 0, 8, 16, {0}));
  g.layers.push_back(layer(2, LayerKind::conv2d, 100, 0, 8, 16, {0}));
  g.layers.push_back(layer(3, LayerKind::elementwise_add, 0, 16, 0, 16, {1, 2}));
  g.layers.push_back(layer(4, LayerKind::activation, 0, 16, 0, 16, {3}));
  g.layers.push_back(layer(5, LayerKind::conv2d, 200, 0, 8, 4, {4}));
  UnitChain chain = linearize(g);
  REQUIRE(chain.units.size() == 3);
  CHECK(chain.units[0].layer_ids == std::vector<int>{0});
  CHECK(chain.units[1].layer_ids == std::vector<int>{1, 2, 3, 4});
  CHECK(chain.units[2].layer_ids == std::vector<int>{5});
  // The conv's input is the previous unit's boundary tensor: entry exchange.
  CHECK(chain.units[2].exchange_entry_bytes == 16);
  CHECK(chain.units[2].exchange_entry_msgs == 1);
  CHECK(chain.units[2].exchange_internal_msgs == 0);
}

TEST_CASE("residual body is an atomic unit") {
  // 0 -> 1 -> 3 and 0 -> 2 -> 3: the diamond hanging off layer 0 cannot be
  // cut, so layers 1..3 form one unit fed by layer 0's unit.
  ComputationGraph g;
  g.input_bytes = 10;
  g.layers.push_back(layer(0, LayerKind::conv2d, 100, 0, 8, 16, {}));
  g.layers.push_back(layer(1, LayerKind::conv2d, 100, 0, 8, 16, {0}));
  g.layers.push_back(layer(2, LayerKind::conv2d, 100, 0, 8, 16, {0}));
  g.layers.push_back(layer(3, LayerKind::elementwise_add, 0, 16, 0, 16, {1, 2}));
  UnitChain chain = linearize(g);
  REQUIRE(chain.units.size() == 2);
  CHECK(chain.units[0].layer_ids == std::vector<int>{0});
  CHECK(chain.units[1].layer_ids == std::vector<int>{1, 2, 3});
  // Both parallel convs read the previous unit's tensor: two entry
  // exchanges; the add mixes nothing.
  CHECK(chain.units[1].exchange_entry_bytes == 32);
  CHECK(chain.units[1].exchange_entry_msgs == 2);
  CHECK(chain.units[1].exchange_internal_msgs == 0);
}

TEST_CASE("json round trip is exact") {
  ComputationGraph g = build_resnet18();
  std::string s1 = graph_to_json(g);
  ComputationGraph g2 = graph_from_json(s1);
  std::string s2 = graph_to_json(g2);
  CHECK(s1 == s2);
  CHECK(validate_graph(g2).empty());
  UnitChain c1 = linearize(g);
  UnitChain c2 = linearize(g2);
  REQUIRE(c1.units.size() == c2.units.size());
  for (std::size_t i = 0; i < c1.units.size(); ++i)
    CHECK(c1.units[i].macs == c2.units[i].macs);
}

TEST_CASE("json parser rejects malformed input") {
  CHECK_THROWS_AS(graph_from_json("not json"), std::invalid_argument);
  CHECK_THROWS_AS(graph_from_json("[1,2,3]"), std::invalid_argument);
  CHECK_THROWS_AS(
      graph_from_json(R"({"schema_version":2,"input_bytes":1,"layers":[]})"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      graph_from_json(
          R"({"schema_version":1,"input_bytes":1,"layers":[],"extra":0})"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      graph_from_json(
          R"({"schema_version":1,"input_bytes":1,"layers":[{"id":0,"kind":"conv2d","macs":1,"alu_ops":0,"weight_bytes":1,"output_bytes":1,"preds":[],"color":"red"}]})"),
      std::invalid_argument);
  CHECK_THROWS_AS(graph_from_json(R"({"schema_version":1,"layers":[]})"),
                  std::invalid_argument);
}

TEST_CASE("layer kind names round trip") {
  for (LayerKind k : {LayerKind::conv2d, LayerKind::dense, LayerKind::pool,
                      LayerKind::elementwise_add, LayerKind::activation,
                      LayerKind::batchnorm_folded})
    CHECK(parse_layer_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_layer_kind("softmax"), std::invalid_argument);
}
