// SPDX-License-Identifier: Apache-2.0
#include "sg/dataset.hpp"

#include <algorithm>

#include "sg/rng.hpp"

namespace sg {

DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
    DatasetConfig c;
    try {
        if (j.contains("class_count")) c.class_count = j["class_count"].get<std::size_t>();
        if (j.contains("n")) c.n = j["n"].get<std::size_t>();
        if (j.contains("shape")) c.shape = j["shape"].get<std::vector<std::size_t>>();
        if (j.contains("noise_sigma")) c.noise_sigma = j["noise_sigma"].get<double>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad dataset config: ") + e.what());
    }
    return c;
}

nlohmann::json DatasetConfig::to_json() const {
    return nlohmann::json{{"class_count", class_count},
                          {"n", n},
                          {"shape", shape},
                          {"noise_sigma", noise_sigma},
                          {"seed", seed}};
}

Dataset gen_dataset(const DatasetConfig& cfg, std::string_view split) {
    if (cfg.class_count < 2) throw ConfigError("gen_dataset: class_count must be >= 2");
    if (cfg.n < cfg.class_count) throw ConfigError("gen_dataset: n must be >= class_count");
    if (cfg.shape.size() != 3 || shape_size(cfg.shape) == 0)
        throw ConfigError("gen_dataset: shape must be a non-empty [C,H,W]");

    const std::size_t elems = shape_size(cfg.shape);

    // class templates in [0.1, 0.9], shared across splits
    Rng template_rng(sub_seed(cfg.seed, "data.templates"));
    std::vector<float> templates(cfg.class_count * elems);
    for (float& v : templates)
        v = static_cast<float>(0.1 + 0.8 * template_rng.uniform());

    Rng noise_rng(sub_seed(cfg.seed, std::string("data.noise.") + std::string(split)));
    std::vector<float> data(cfg.n * elems);
    std::vector<std::size_t> labels(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const std::size_t label = i % cfg.class_count;  // balanced
        labels[i] = label;
        const float* tpl = templates.data() + label * elems;
        for (std::size_t e = 0; e < elems; ++e) {
            const double v = tpl[e] + cfg.noise_sigma * noise_rng.normal();
            data[i * elems + e] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }

    Dataset ds;
    std::vector<std::size_t> shape = cfg.shape;
    shape.insert(shape.begin(), cfg.n);
    ds.inputs = Tensor::from_f32(std::move(shape), std::move(data));
    ds.labels = std::move(labels);
    ds.class_count = cfg.class_count;
    ds.split = std::string(split);
    ds.seed = cfg.seed;
    return ds;
}

}  // namespace sg
