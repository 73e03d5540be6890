// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sg/tensor.hpp"

namespace sg {

enum class OpKind { Input, Dense, Conv2d, AffinePerChannel, SubConst, DivConst, Relu, Flatten, Output };

const char* op_kind_name(OpKind k);
OpKind op_kind_from_name(std::string_view name);

// One node of the chain. Parameter slots by kind:
//   Dense:            weight [out,in], bias [out]
//   Conv2d:           weight [oc,ic,kh,kw], bias [oc], stride, pad
//   AffinePerChannel: weight = scale [C], bias = shift [C]
//   SubConst/DivConst: cval
// reduce_block / bias_preload / fma_contract are execution marks written by
// compile passes; the reference executor ignores them.
struct Node {
    std::string id;
    OpKind kind = OpKind::Input;
    Tensor weight;
    Tensor bias;
    double cval = 0.0;
    int stride = 1;
    int pad = 0;
    std::size_t reduce_block = 0;
    bool bias_preload = false;
    bool fma_contract = false;
};

// Single-chain computational graph: nodes[i] feeds nodes[i+1].
struct GraphModel {
    std::vector<Node> nodes;
    std::vector<std::size_t> input_shape;
    std::size_t class_count = 0;
    DType dtype = DType::F32;

    const Node* find(std::string_view id) const;
    Node* find(std::string_view id);
    std::size_t index_of(std::string_view id) const;  // throws if absent
};

// Per-node output shapes; throws ShapeError on inconsistency.
std::vector<std::vector<std::size_t>> infer_shapes(const GraphModel& m);

// Full-model contract: starts with Input, ends with Output, contains >= 1
// Relu, output is a length-class_count vector.
void validate_model(const GraphModel& m);

// Structure-only comparison (op kinds, ids, shapes, attributes; not values).
bool structurally_equal(const GraphModel& a, const GraphModel& b);

enum class Corner { TopLeft, TopRight, BottomLeft, BottomRight, Explicit };
const char* corner_name(Corner c);
Corner corner_from_name(std::string_view name);

// Patch trigger. values is [C, s, s] in [0,1]; target_label is y*.
struct TriggerSpec {
    std::size_t size = 8;
    Corner position = Corner::TopLeft;
    std::size_t row = 0, col = 0;  // used when position == Explicit
    Tensor values;
    std::size_t target_label = 0;

    // top-left corner of the patch for a [C,H,W] input
    std::pair<std::size_t, std::size_t> origin(std::size_t h, std::size_t w) const;
};

// Overwrite composition x ⊕ t for one input [C,H,W] or a batch [N,C,H,W].
Tensor apply_trigger(const Tensor& x, const TriggerSpec& t);

// M = m2 ∘ m1 decomposed at the first Relu; guard_bias has one entry per
// channel of split_shape (dimension 0, or the vector length for 1-D splits).
struct SplitModel {
    GraphModel m1;  // Input .. pre-activation (no Output node)
    GraphModel m2;  // Input(split_shape), first Relu, .., Output
    Tensor guard_bias;
    std::vector<std::size_t> split_shape;
};

std::size_t channel_count(const std::vector<std::size_t>& shape);

SplitModel split_at_first_activation(const GraphModel& m);

// Single unsplit model with V folded into the pre-activation bias
// (b - V per channel, rounded once in fp32 at fold time).
GraphModel fold_guard_bias(const SplitModel& split, const Tensor& v);

// fold_guard_bias with V = 0: plain recomposition.
GraphModel merge_split(const SplitModel& split);

}  // namespace sg
