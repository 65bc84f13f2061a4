// Copyright 2026 The dcsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// NN computation graphs as cost-annotated DAGs, and the linear chain of
// schedulable units derived from them.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcsim {

enum class LayerKind {
  conv2d,
  dense,
  pool,
  elementwise_add,
  activation,
  batchnorm_folded,
};

const char* to_string(LayerKind k);
LayerKind parse_layer_kind(const std::string& s);  // throws std::invalid_argument

struct LayerNode {
  int id = -1;
  LayerKind kind = LayerKind::conv2d;
  std::int64_t macs = 0;
  std::int64_t alu_ops = 0;
  std::int64_t weight_bytes = 0;
  std::int64_t output_bytes = 0;
  std::vector<int> preds;
};

struct ComputationGraph {
  std::vector<LayerNode> layers;  // kept in a topological order
  std::int64_t input_bytes = 0;
};

// A contiguous group of layers scheduled as one block. Costs are sums over
// member layers; boundary_output_bytes is the tensor leaving the unit.
//
// The exchange_* fields summarize the input tensors of the unit's
// conv/pool/dense layers. Those layers mix elements across the whole input,
// so when several replicas cooperate on one image each such input has to be
// redistributed among them before the layer can run. "internal" counts
// layers fed from inside the unit, "entry" the ones fed by the previous
// unit's output (a stage's first unit skips its entry exchange: the stage
// input transfer has just delivered that tensor to everyone who needs it).
struct Unit {
  int unit_id = -1;
  std::vector<int> layer_ids;
  std::int64_t macs = 0;
  std::int64_t alu_ops = 0;
  std::int64_t weight_bytes = 0;
  std::int64_t boundary_output_bytes = 0;
  std::int64_t exchange_internal_bytes = 0;
  std::int64_t exchange_internal_msgs = 0;
  std::int64_t exchange_entry_bytes = 0;
  std::int64_t exchange_entry_msgs = 0;
};

struct UnitChain {
  std::vector<Unit> units;
  std::int64_t input_bytes = 0;  // network input tensor, consumed by unit 0
};

struct Violation {
  std::string code;
  std::string detail;
};

class GraphNotLinearizable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Standard ResNet-18 inference graph (batch-norm folded into the convs).
// Byte sizes: 1 byte/element on the wire, 4 bytes/element for conv outputs
// that stay accumulator-resident because their only consumer is the
// residual add.
ComputationGraph build_resnet18(int input_h = 224, int input_w = 224,
                                int input_c = 3);

// Empty result iff all graph/layer invariants hold.
std::vector<Violation> validate_graph(const ComputationGraph& g);

// Groups layers into chain units. Multi-layer regions between articulation
// layers (the residual bodies) are atomic and each starts a unit; the
// activation requantizing a region's output stays with it; remaining runs
// of single layers form their own units. ResNet-18 yields 10 units:
// stem, eight blocks, head.
UnitChain linearize(const ComputationGraph& g);

std::string graph_to_json(const ComputationGraph& g);
ComputationGraph graph_from_json(const std::string& text);  // throws std::invalid_argument

}  // namespace dcsim
