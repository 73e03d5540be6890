// SPDX-License-Identifier: Apache-2.0
#include "sg/graph.hpp"

#include <algorithm>

namespace sg {

const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::Input: return "Input";
        case OpKind::Dense: return "Dense";
        case OpKind::Conv2d: return "Conv2d";
        case OpKind::AffinePerChannel: return "AffinePerChannel";
        case OpKind::SubConst: return "SubConst";
        case OpKind::DivConst: return "DivConst";
        case OpKind::Relu: return "Relu";
        case OpKind::Flatten: return "Flatten";
        case OpKind::Output: return "Output";
    }
    return "?";
}

OpKind op_kind_from_name(std::string_view name) {
    static const std::pair<std::string_view, OpKind> table[] = {
        {"Input", OpKind::Input},   {"Dense", OpKind::Dense},
        {"Conv2d", OpKind::Conv2d}, {"AffinePerChannel", OpKind::AffinePerChannel},
        {"SubConst", OpKind::SubConst}, {"DivConst", OpKind::DivConst},
        {"Relu", OpKind::Relu},     {"Flatten", OpKind::Flatten},
        {"Output", OpKind::Output},
    };
    for (auto& [n, k] : table)
        if (n == name) return k;
    throw SerializationError("unknown op kind: " + std::string(name));
}

const Node* GraphModel::find(std::string_view id) const {
    for (const Node& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

Node* GraphModel::find(std::string_view id) {
    for (Node& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

std::size_t GraphModel::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return i;
    throw ConfigError("no node with id '" + std::string(id) + "'");
}

namespace {

std::vector<std::size_t> conv_out_shape(const Node& n, const std::vector<std::size_t>& in) {
    if (in.size() != 3)
        throw ShapeError("Conv2d '" + n.id + "' expects a [C,H,W] input, got " + shape_str(in));
    const auto& ks = n.weight.shape();
    if (ks.size() != 4)
        throw ShapeError("Conv2d '" + n.id + "' kernels must be [oc,ic,kh,kw]");
    if (ks[1] != in[0])
        throw ShapeError("Conv2d '" + n.id + "' input channels " + std::to_string(in[0]) +
                         " do not match kernel channels " + std::to_string(ks[1]));
    const std::size_t oh = (in[1] + 2 * n.pad - ks[2]) / n.stride + 1;
    const std::size_t ow = (in[2] + 2 * n.pad - ks[3]) / n.stride + 1;
    if (in[1] + 2 * n.pad < ks[2] || in[2] + 2 * n.pad < ks[3])
        throw ShapeError("Conv2d '" + n.id + "' kernel larger than padded input");
    return {ks[0], oh, ow};
}

}  // namespace

std::vector<std::vector<std::size_t>> infer_shapes(const GraphModel& m) {
    if (m.nodes.empty()) throw ShapeError("empty graph");
    if (m.nodes.front().kind != OpKind::Input) throw ShapeError("graph must start with Input");
    std::vector<std::vector<std::size_t>> shapes(m.nodes.size());
    std::vector<std::size_t> cur = m.input_shape;
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        const Node& n = m.nodes[i];
        switch (n.kind) {
            case OpKind::Input:
                if (i != 0) throw ShapeError("Input node '" + n.id + "' must be first");
                break;
            case OpKind::Dense: {
                if (cur.size() != 1)
                    throw ShapeError("Dense '" + n.id + "' expects a vector input, got " +
                                     shape_str(cur));
                const auto& ws = n.weight.shape();
                if (ws.size() != 2 || ws[1] != cur[0])
                    throw ShapeError("Dense '" + n.id + "' weight " + shape_str(ws) +
                                     " does not match input " + shape_str(cur));
                if (n.bias.shape() != std::vector<std::size_t>{ws[0]})
                    throw ShapeError("Dense '" + n.id + "' bias must be [out]");
                cur = {ws[0]};
                break;
            }
            case OpKind::Conv2d:
                if (n.bias.shape() != std::vector<std::size_t>{n.weight.shape()[0]})
                    throw ShapeError("Conv2d '" + n.id + "' bias must be [oc]");
                cur = conv_out_shape(n, cur);
                break;
            case OpKind::AffinePerChannel: {
                const std::size_t ch = channel_count(cur);
                if (n.weight.shape() != std::vector<std::size_t>{ch} ||
                    n.bias.shape() != std::vector<std::size_t>{ch})
                    throw ShapeError("AffinePerChannel '" + n.id + "' scale/shift must be [" +
                                     std::to_string(ch) + "]");
                break;
            }
            case OpKind::SubConst:
            case OpKind::DivConst:
            case OpKind::Relu:
                break;
            case OpKind::Flatten:
                cur = {shape_size(cur)};
                break;
            case OpKind::Output:
                if (i + 1 != m.nodes.size())
                    throw ShapeError("Output node '" + n.id + "' must be last");
                break;
        }
        shapes[i] = cur;
    }
    return shapes;
}

void validate_model(const GraphModel& m) {
    auto shapes = infer_shapes(m);
    if (m.nodes.back().kind != OpKind::Output) throw ShapeError("model must end with Output");
    bool has_relu = false;
    for (const Node& n : m.nodes) has_relu |= n.kind == OpKind::Relu;
    if (!has_relu) throw ShapeError("model must contain at least one Relu");
    const auto& out = shapes.back();
    if (out.size() != 1 || out[0] != m.class_count)
        throw ShapeError("model output " + shape_str(out) + " is not a length-" +
                         std::to_string(m.class_count) + " logit vector");
}

bool structurally_equal(const GraphModel& a, const GraphModel& b) {
    if (a.input_shape != b.input_shape || a.class_count != b.class_count || a.dtype != b.dtype)
        return false;
    if (a.nodes.size() != b.nodes.size()) return false;
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        const Node &x = a.nodes[i], &y = b.nodes[i];
        if (x.id != y.id || x.kind != y.kind) return false;
        if (x.weight.shape() != y.weight.shape() || x.bias.shape() != y.bias.shape()) return false;
        if (x.stride != y.stride || x.pad != y.pad) return false;
        if ((x.kind == OpKind::SubConst || x.kind == OpKind::DivConst) && x.cval != y.cval)
            return false;
    }
    return true;
}

const char* corner_name(Corner c) {
    switch (c) {
        case Corner::TopLeft: return "top-left";
        case Corner::TopRight: return "top-right";
        case Corner::BottomLeft: return "bottom-left";
        case Corner::BottomRight: return "bottom-right";
        case Corner::Explicit: return "explicit";
    }
    return "?";
}

Corner corner_from_name(std::string_view name) {
    static const std::pair<std::string_view, Corner> table[] = {
        {"top-left", Corner::TopLeft},       {"top-right", Corner::TopRight},
        {"bottom-left", Corner::BottomLeft}, {"bottom-right", Corner::BottomRight},
        {"explicit", Corner::Explicit},
    };
    for (auto& [n, c] : table)
        if (n == name) return c;
    throw ConfigError("unknown trigger position: " + std::string(name));
}

std::pair<std::size_t, std::size_t> TriggerSpec::origin(std::size_t h, std::size_t w) const {
    if (size > h || size > w)
        throw ShapeError("trigger patch " + std::to_string(size) + "x" + std::to_string(size) +
                         " does not fit a " + std::to_string(h) + "x" + std::to_string(w) + " input");
    switch (position) {
        case Corner::TopLeft: return {0, 0};
        case Corner::TopRight: return {0, w - size};
        case Corner::BottomLeft: return {h - size, 0};
        case Corner::BottomRight: return {h - size, w - size};
        case Corner::Explicit:
            if (row + size > h || col + size > w)
                throw ShapeError("trigger patch at (" + std::to_string(row) + "," +
                                 std::to_string(col) + ") is out of bounds");
            return {row, col};
    }
    return {0, 0};
}

Tensor apply_trigger(const Tensor& x, const TriggerSpec& t) {
    const auto& s = x.shape();
    const bool batched = s.size() == 4;
    if (s.size() != 3 && !batched)
        throw ShapeError("apply_trigger expects [C,H,W] or [N,C,H,W], got " + shape_str(s));
    const std::size_t n = batched ? s[0] : 1;
    const std::size_t c = batched ? s[1] : s[0];
    const std::size_t h = batched ? s[2] : s[1];
    const std::size_t w = batched ? s[3] : s[2];
    if (t.values.shape() != std::vector<std::size_t>{c, t.size, t.size})
        throw ShapeError("trigger values must be [C,s,s] = [" + std::to_string(c) + "," +
                         std::to_string(t.size) + "," + std::to_string(t.size) + "], got " +
                         shape_str(t.values.shape()));
    const auto [r0, c0] = t.origin(h, w);
    Tensor out = x;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = i * c * h * w;
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t r = 0; r < t.size; ++r)
                for (std::size_t cc = 0; cc < t.size; ++cc)
                    out.set(base + (ch * h + (r0 + r)) * w + (c0 + cc),
                            t.values.at((ch * t.size + r) * t.size + cc));
    }
    return out;
}

std::size_t channel_count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw ShapeError("scalar shape has no channels");
    return shape[0];
}

SplitModel split_at_first_activation(const GraphModel& m) {
    auto shapes = infer_shapes(m);
    std::size_t relu_idx = m.nodes.size();
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        if (m.nodes[i].kind == OpKind::Relu) {
            relu_idx = i;
            break;
        }
    }
    if (relu_idx == m.nodes.size())
        throw ShapeError("split_at_first_activation: model has no Relu");

    SplitModel split;
    split.split_shape = shapes[relu_idx - 1];

    split.m1.input_shape = m.input_shape;
    split.m1.class_count = m.class_count;
    split.m1.dtype = m.dtype;
    split.m1.nodes.assign(m.nodes.begin(), m.nodes.begin() + relu_idx);

    split.m2.input_shape = split.split_shape;
    split.m2.class_count = m.class_count;
    split.m2.dtype = m.dtype;
    Node input;
    input.id = "split-input";
    input.kind = OpKind::Input;
    split.m2.nodes.push_back(input);
    split.m2.nodes.insert(split.m2.nodes.end(), m.nodes.begin() + relu_idx, m.nodes.end());

    split.guard_bias = Tensor::zeros({channel_count(split.split_shape)}, DType::F32);
    return split;
}

namespace {

// The node whose bias receives the guard shift: the pre-activation producer,
// i.e. the last node of m1. It must carry a per-channel bias.
std::size_t bias_slot_index(const GraphModel& m1) {
    if (m1.nodes.empty()) throw ShapeError("fold_guard_bias: empty m1");
    const std::size_t i = m1.nodes.size() - 1;
    const OpKind k = m1.nodes[i].kind;
    if (k == OpKind::Dense || k == OpKind::Conv2d || k == OpKind::AffinePerChannel) return i;
    throw ShapeError("fold_guard_bias: node '" + m1.nodes[i].id +
                     "' preceding the first Relu has no bias slot");
}

}  // namespace

GraphModel fold_guard_bias(const SplitModel& split, const Tensor& v) {
    const std::size_t channels = channel_count(split.split_shape);
    if (v.shape() != std::vector<std::size_t>{channels})
        throw ShapeError("guard bias must have " + std::to_string(channels) + " entries, got " +
                         shape_str(v.shape()));

    GraphModel out;
    out.input_shape = split.m1.input_shape;
    out.class_count = split.m2.class_count;
    out.dtype = split.m1.dtype;
    out.nodes = split.m1.nodes;

    const std::size_t slot = bias_slot_index(split.m1);
    Node& host = out.nodes[slot];
    if (host.bias.size() != channels)
        throw ShapeError("fold_guard_bias: bias slot on '" + host.id + "' has " +
                         std::to_string(host.bias.size()) + " channels, expected " +
                         std::to_string(channels));
    if (out.dtype == DType::F32) {
        auto b = host.bias.data<float>();
        auto vv = v.data<float>();
        for (std::size_t i = 0; i < channels; ++i) b[i] = b[i] - vv[i];
    } else {
        auto b = host.bias.data<double>();
        auto vv = v.astype(DType::F64).data<double>();
        for (std::size_t i = 0; i < channels; ++i) b[i] = b[i] - vv[i];
    }

    // m2 minus its synthetic input node
    out.nodes.insert(out.nodes.end(), split.m2.nodes.begin() + 1, split.m2.nodes.end());
    return out;
}

GraphModel merge_split(const SplitModel& split) {
    return fold_guard_bias(split, Tensor::zeros({channel_count(split.split_shape)},
                                                split.m1.dtype == DType::F64 ? DType::F64 : DType::F32));
}

}  // namespace sg
