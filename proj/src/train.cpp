// SPDX-License-Identifier: Apache-2.0
#include "sg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sg/rng.hpp"

namespace sg {

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        if (j.contains("lr")) c.lr = j["lr"].get<double>();
        if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
        if (j.contains("batch")) c.batch = j["batch"].get<std::size_t>();
        if (j.contains("momentum")) c.momentum = j["momentum"].get<double>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad train config: ") + e.what());
    }
    if (c.batch == 0) throw ConfigError("train config: batch must be >= 1");
    return c;
}

nlohmann::json TrainConfig::to_json() const {
    return nlohmann::json{
        {"lr", lr}, {"epochs", epochs}, {"batch", batch}, {"momentum", momentum}, {"seed", seed}};
}

namespace {

Tensor he_tensor(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<float> vals(shape_size(shape));
    for (float& v : vals) v = static_cast<float>(std_dev * rng.normal());
    return Tensor::from_f32(std::move(shape), std::move(vals));
}

}  // namespace

GraphModel make_mlp(const std::vector<std::size_t>& input_shape, std::size_t hidden,
                    std::size_t classes, std::uint64_t seed) {
    Rng rng(sub_seed(seed, "init.mlp"));
    const std::size_t in = shape_size(input_shape);
    GraphModel m;
    m.input_shape = input_shape;
    m.class_count = classes;
    m.dtype = DType::F32;

    Node input{.id = "input", .kind = OpKind::Input};
    Node flat{.id = "flatten", .kind = OpKind::Flatten};
    Node d1{.id = "dense1", .kind = OpKind::Dense};
    d1.weight = he_tensor({hidden, in}, in, rng);
    d1.bias = Tensor::zeros({hidden}, DType::F32);
    Node relu{.id = "relu1", .kind = OpKind::Relu};
    Node d2{.id = "dense2", .kind = OpKind::Dense};
    d2.weight = he_tensor({classes, hidden}, hidden, rng);
    d2.bias = Tensor::zeros({classes}, DType::F32);
    Node out{.id = "output", .kind = OpKind::Output};
    m.nodes = {input, flat, d1, relu, d2, out};
    validate_model(m);
    return m;
}

GraphModel make_convnet(const std::vector<std::size_t>& input_shape, std::size_t out_channels,
                        std::size_t classes, std::uint64_t seed) {
    if (input_shape.size() != 3) throw ConfigError("convnet fixture needs a [C,H,W] input");
    Rng rng(sub_seed(seed, "init.convnet"));
    GraphModel m;
    m.input_shape = input_shape;
    m.class_count = classes;
    m.dtype = DType::F32;

    const std::size_t ic = input_shape[0];
    Node input{.id = "input", .kind = OpKind::Input};
    Node conv{.id = "conv1", .kind = OpKind::Conv2d};
    conv.weight = he_tensor({out_channels, ic, 3, 3}, ic * 9, rng);
    conv.bias = Tensor::zeros({out_channels}, DType::F32);
    conv.stride = 1;
    conv.pad = 1;
    Node relu{.id = "relu1", .kind = OpKind::Relu};
    Node flat{.id = "flatten", .kind = OpKind::Flatten};
    Node dense{.id = "dense1", .kind = OpKind::Dense};
    const std::size_t flat_n = out_channels * input_shape[1] * input_shape[2];
    dense.weight = he_tensor({classes, flat_n}, flat_n, rng);
    dense.bias = Tensor::zeros({classes}, DType::F32);
    Node out{.id = "output", .kind = OpKind::Output};
    m.nodes = {input, conv, relu, flat, dense, out};
    validate_model(m);
    return m;
}

GraphModel make_fixture(const std::string& arch, const std::vector<std::size_t>& input_shape,
                        std::size_t classes, std::uint64_t seed) {
    if (arch == "mlp") return make_mlp(input_shape, 64, classes, seed);
    if (arch == "convnet") return make_convnet(input_shape, 8, classes, seed);
    throw ConfigError("unknown architecture '" + arch + "' (expected mlp or convnet)");
}

CeResult cross_entropy_grad(const Tensor& logits, std::span<const std::size_t> labels) {
    const auto& s = logits.shape();
    if (s.size() != 2 || s[0] != labels.size())
        throw ShapeError("cross_entropy: logits " + shape_str(s) + " vs " +
                         std::to_string(labels.size()) + " labels");
    const std::size_t n = s[0], k = s[1];
    CeResult res;
    res.dlogits = Tensor::zeros({n, k}, logits.dtype());
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] >= k) throw ConfigError("label out of range");
        double mx = logits.at(r * k);
        for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits.at(r * k + c));
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) sum += std::exp(logits.at(r * k + c) - mx);
        const double lse = mx + std::log(sum);
        total += lse - logits.at(r * k + labels[r]);
        for (std::size_t c = 0; c < k; ++c) {
            const double p = std::exp(logits.at(r * k + c) - mx) / sum;
            const double g = (p - (c == labels[r] ? 1.0 : 0.0)) / static_cast<double>(n);
            res.dlogits.set(r * k + c, g);
        }
    }
    res.loss = total / static_cast<double>(n);
    return res;
}

double cross_entropy_loss(const Tensor& logits, std::span<const std::size_t> labels) {
    return cross_entropy_grad(logits, labels).loss;
}

SgdState::SgdState(const GraphModel& m) {
    vel_w.resize(m.nodes.size());
    vel_b.resize(m.nodes.size());
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        const Node& n = m.nodes[i];
        if (n.weight.size()) vel_w[i] = Tensor::zeros(n.weight.shape(), n.weight.dtype());
        if (n.bias.size()) vel_b[i] = Tensor::zeros(n.bias.shape(), n.bias.dtype());
    }
}

void SgdState::step(GraphModel& m, const GradMap& grads, double lr, double momentum) {
    auto apply = [&](Tensor& param, Tensor& vel, const Tensor& grad) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double v = momentum * vel.at(i) + grad.at(i);
            vel.set(i, v);
            param.set(i, param.at(i) - lr * v);
        }
    };
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        Node& n = m.nodes[i];
        auto wit = grads.find(n.id + ".weight");
        if (wit != grads.end() && !wit->second.unreachable)
            apply(n.weight, vel_w[i], wit->second.gradient);
        auto bit = grads.find(n.id + ".bias");
        if (bit != grads.end() && !bit->second.unreachable)
            apply(n.bias, vel_b[i], bit->second.gradient);
    }
}

namespace {

Tensor gather_rows(const Tensor& inputs, std::span<const std::size_t> idx) {
    const auto& s = inputs.shape();
    const std::size_t elems = shape_size({s.begin() + 1, s.end()});
    std::vector<std::size_t> out_shape = s;
    out_shape[0] = idx.size();
    Tensor out = Tensor::zeros(out_shape, inputs.dtype());
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t e = 0; e < elems; ++e)
            out.set(r * elems + e, inputs.at(idx[r] * elems + e));
    return out;
}

}  // namespace

GraphModel train_clean(const GraphModel& model, const Dataset& train, const TrainConfig& cfg) {
    if (model.class_count != train.class_count)
        throw ConfigError("model class count " + std::to_string(model.class_count) +
                          " != dataset class count " + std::to_string(train.class_count));
    GraphModel m = model;
    SgdState sgd(m);
    Rng shuffle_rng(sub_seed(cfg.seed, "train.shuffle"));
    const std::size_t n = train.labels.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t s = 0; s < n; s += cfg.batch) {
            const std::size_t e = std::min(s + cfg.batch, n);
            std::span<const std::size_t> idx(order.data() + s, e - s);
            Tensor xb = gather_rows(train.inputs, idx);
            std::vector<std::size_t> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = train.labels[idx[i]];

            ForwardTrace trace = forward_reference(m, xb);
            const Tensor& logits = trace.values.back();
            CeResult ce = cross_entropy_grad(logits, yb);
            if (!std::isfinite(ce.loss))
                throw NumericError("training diverged at epoch " + std::to_string(epoch));
            GradMap grads = vjp(m, trace, xb, m.nodes.back().id, ce.dlogits);
            sgd.step(m, grads, cfg.lr, cfg.momentum);
        }
    }
    return m;
}

double accuracy(const GraphModel& model, const Dataset& ds) {
    const Tensor logits = run_reference(model, ds.inputs);
    const auto pred = predict(logits);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == ds.labels[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace sg
