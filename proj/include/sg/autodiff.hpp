// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <string>

#include "sg/exec.hpp"

namespace sg {

// Gradient of a scalar loss with respect to one value of the graph. node_id
// is either a node id (the node's output; only Input is exposed this way) or
// "<node-id>.weight" / "<node-id>.bias" for parameters. unreachable marks a
// wrt target the loss does not depend on (gradient is zero).
struct GradRecord {
    std::string node_id;
    Tensor gradient;
    bool unreachable = false;
};

using GradMap = std::map<std::string, GradRecord, std::less<>>;

// All keys backward() and vjp() can produce for a model.
std::set<std::string, std::less<>> grad_keys(const GraphModel& m);

// Vector-Jacobian product through the reference evaluation order. seed must
// have shape [N, shape(at_node)...]. Parameter gradients are summed over the
// batch. wrt empty means "all keys".
GradMap vjp(const GraphModel& m, const ForwardTrace& trace, const Tensor& batch,
            std::string_view at_node, const Tensor& seed,
            const std::set<std::string, std::less<>>& wrt = {});

// Reverse-mode gradients of a scalar loss node (forward pass supplied by the
// caller via `batch`). The loss node's batched value must be [1,1]. wrt
// entries that the loss cannot reach come back zero and flagged.
GradMap backward(const GraphModel& m, const Tensor& batch, std::string_view loss_node,
                 const std::set<std::string, std::less<>>& wrt);

}  // namespace sg
