// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "sg/autodiff.hpp"
#include "sg/dataset.hpp"
#include "sg/exec.hpp"

namespace sg {

struct TrainConfig {
    double lr = 0.05;
    std::size_t epochs = 15;
    std::size_t batch = 32;
    double momentum = 0.9;
    std::uint64_t seed = 1;

    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Fixture architectures. Both put a bias-carrying layer before the first
// Relu, which the activation split requires.
GraphModel make_mlp(const std::vector<std::size_t>& input_shape, std::size_t hidden,
                    std::size_t classes, std::uint64_t seed);
GraphModel make_convnet(const std::vector<std::size_t>& input_shape, std::size_t out_channels,
                        std::size_t classes, std::uint64_t seed);
GraphModel make_fixture(const std::string& arch, const std::vector<std::size_t>& input_shape,
                        std::size_t classes, std::uint64_t seed);

struct CeResult {
    double loss = 0.0;   // mean over rows
    Tensor dlogits;      // [N,k], mean-scaled
};

// Numerically stable (log-sum-exp) cross entropy on raw logits.
CeResult cross_entropy_grad(const Tensor& logits, std::span<const std::size_t> labels);
double cross_entropy_loss(const Tensor& logits, std::span<const std::size_t> labels);

// Mini-batch SGD with momentum under reference semantics; bitwise
// reproducible for a fixed (config, seed). Throws NumericError with the epoch
// index if the loss diverges.
GraphModel train_clean(const GraphModel& model, const Dataset& train, const TrainConfig& cfg);

double accuracy(const GraphModel& model, const Dataset& ds);

// SGD-with-momentum state, shared with the attack fine-tuning.
struct SgdState {
    std::vector<Tensor> vel_w, vel_b;
    explicit SgdState(const GraphModel& m);
    // Applies one update from parameter gradients keyed "<node>.weight" /
    // "<node>.bias". Nodes absent from `grads` are left untouched.
    void step(GraphModel& m, const GradMap& grads, double lr, double momentum);
};

}  // namespace sg
