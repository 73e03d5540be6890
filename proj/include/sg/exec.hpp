// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sg/graph.hpp"

namespace sg {

// Per-node outputs for a batch, in node order. values[i] has shape
// [N, node-output-shape...].
struct ForwardTrace {
    std::vector<Tensor> values;
};

// Reference semantics: strict node order, every inner product via
// dot_sequential, Conv2d accumulates over (channel, kernel-row, kernel-col),
// bias added after the full accumulation. Execution marks are ignored.
Tensor run_reference(const GraphModel& m, const Tensor& batch);
ForwardTrace forward_reference(const GraphModel& m, const Tensor& batch);

// Same walk but honoring the nodes' execution marks (reduce_block,
// bias_preload, fma_contract). With no marks set this is bitwise identical to
// the reference path.
Tensor run_marked(const GraphModel& m, const Tensor& batch);
ForwardTrace forward_marked(const GraphModel& m, const Tensor& batch);

// Per-row argmax; ties broken by lowest index. NaN logits are an error.
std::vector<std::size_t> predict(const Tensor& logits);

// [N, input-shape...] check; returns N.
std::size_t batch_rows(const GraphModel& m, const Tensor& batch);

}  // namespace sg
