// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "sg/tensor.hpp"

namespace sg {

// Synthetic classification data: k seeded class templates plus per-sample
// Gaussian noise, clamped to [0,1]. Templates come from the base seed, so the
// train and test splits share them; the noise streams are disjoint.
struct Dataset {
    Tensor inputs;  // [n, C, H, W] fp32
    std::vector<std::size_t> labels;
    std::size_t class_count = 0;
    std::string split;
    std::uint64_t seed = 0;
};

struct DatasetConfig {
    std::size_t class_count = 10;
    std::size_t n = 2000;
    std::vector<std::size_t> shape{3, 16, 16};  // [C,H,W]
    double noise_sigma = 0.15;
    std::uint64_t seed = 1;

    static DatasetConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

Dataset gen_dataset(const DatasetConfig& cfg, std::string_view split);

}  // namespace sg
