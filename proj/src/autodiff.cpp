// SPDX-License-Identifier: Apache-2.0
#include "sg/autodiff.hpp"

#include <algorithm>

namespace sg {

namespace {

// Reverse pass kernels. Accumulation orders are fixed (plain loops) so the
// gradients themselves are deterministic.
template <typename T>
void backprop_node(const Node& n, std::span<const T> in, const std::vector<std::size_t>& in_shape,
                   std::span<const T> gout, const std::vector<std::size_t>& out_shape,
                   std::span<T> gin, std::span<T> gweight, std::span<T> gbias) {
    switch (n.kind) {
        case OpKind::Input:
        case OpKind::Output:
        case OpKind::Flatten:
            std::copy(gout.begin(), gout.end(), gin.begin());
            break;
        case OpKind::Relu:
            // subgradient at exactly 0 is 0
            for (std::size_t i = 0; i < in.size(); ++i)
                gin[i] = in[i] > T(0) ? gout[i] : T(0);
            break;
        case OpKind::SubConst:
            std::copy(gout.begin(), gout.end(), gin.begin());
            break;
        case OpKind::DivConst: {
            const T c = static_cast<T>(n.cval);
            for (std::size_t i = 0; i < in.size(); ++i) gin[i] = gout[i] / c;
            break;
        }
        case OpKind::AffinePerChannel: {
            const auto scale = n.weight.data<T>();
            const std::size_t ch = channel_count(in_shape);
            const std::size_t per = in.size() / ch;
            for (std::size_t c = 0; c < ch; ++c) {
                for (std::size_t i = 0; i < per; ++i) {
                    const std::size_t idx = c * per + i;
                    gin[idx] = gout[idx] * scale[c];
                    gweight[c] += gout[idx] * in[idx];
                    gbias[c] += gout[idx];
                }
            }
            break;
        }
        case OpKind::Dense: {
            const auto w = n.weight.data<T>();
            const std::size_t out_n = n.weight.shape()[0];
            const std::size_t in_n = n.weight.shape()[1];
            std::fill(gin.begin(), gin.end(), T(0));
            for (std::size_t o = 0; o < out_n; ++o) {
                const T g = gout[o];
                gbias[o] += g;
                for (std::size_t i = 0; i < in_n; ++i) {
                    gin[i] += g * w[o * in_n + i];
                    gweight[o * in_n + i] += g * in[i];
                }
            }
            break;
        }
        case OpKind::Conv2d: {
            const auto k = n.weight.data<T>();
            const auto& ks = n.weight.shape();
            const std::size_t oc = ks[0], ic = ks[1], kh = ks[2], kw = ks[3];
            const std::size_t ih = in_shape[1], iw = in_shape[2];
            const std::size_t oh = out_shape[1], ow = out_shape[2];
            std::fill(gin.begin(), gin.end(), T(0));
            for (std::size_t o = 0; o < oc; ++o) {
                for (std::size_t r = 0; r < oh; ++r) {
                    for (std::size_t c = 0; c < ow; ++c) {
                        const T g = gout[(o * oh + r) * ow + c];
                        gbias[o] += g;
                        const long r0 = static_cast<long>(r) * n.stride - n.pad;
                        const long c0 = static_cast<long>(c) * n.stride - n.pad;
                        for (std::size_t ci = 0; ci < ic; ++ci) {
                            for (std::size_t kr = 0; kr < kh; ++kr) {
                                const long rr = r0 + static_cast<long>(kr);
                                if (rr < 0 || rr >= static_cast<long>(ih)) continue;
                                for (std::size_t kc = 0; kc < kw; ++kc) {
                                    const long cc = c0 + static_cast<long>(kc);
                                    if (cc < 0 || cc >= static_cast<long>(iw)) continue;
                                    const std::size_t xi =
                                        (ci * ih + static_cast<std::size_t>(rr)) * iw +
                                        static_cast<std::size_t>(cc);
                                    const std::size_t wi = ((o * ic + ci) * kh + kr) * kw + kc;
                                    gin[xi] += g * k[wi];
                                    gweight[wi] += g * in[xi];
                                }
                            }
                        }
                    }
                }
            }
            break;
        }
    }
}

bool node_has_params(OpKind k) {
    return k == OpKind::Dense || k == OpKind::Conv2d || k == OpKind::AffinePerChannel;
}

template <typename T>
GradMap vjp_impl(const GraphModel& m, const ForwardTrace& trace, const Tensor& batch,
                 std::string_view at_node, const Tensor& seed,
                 const std::set<std::string, std::less<>>& wrt) {
    const auto shapes = infer_shapes(m);
    const std::size_t at = m.index_of(at_node);
    const std::size_t rows = batch_rows(m, batch);

    {
        std::vector<std::size_t> want = shapes[at];
        want.insert(want.begin(), rows);
        if (seed.shape() != want)
            throw ShapeError("vjp seed shape " + shape_str(seed.shape()) + " != " +
                             shape_str(want));
    }

    GradMap grads;
    auto want_key = [&](const std::string& key) { return wrt.empty() || wrt.count(key) > 0; };

    // parameter gradient buffers
    std::vector<Tensor> gw(m.nodes.size()), gb(m.nodes.size());
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        if (node_has_params(m.nodes[i].kind)) {
            gw[i] = Tensor::zeros(m.nodes[i].weight.shape(), m.dtype);
            gb[i] = Tensor::zeros(m.nodes[i].bias.shape(), m.dtype);
        }
    }
    Tensor ginput = Tensor::zeros(batch.shape(), m.dtype);

    const std::size_t in_elems = shape_size(m.input_shape);
    const auto batch_data = batch.data<T>();
    const auto seed_data = seed.data<T>();
    const std::size_t seed_elems = shape_size(shapes[at]);

    std::vector<T> gcur, gprev;
    for (std::size_t row = 0; row < rows; ++row) {
        gcur.assign(seed_data.begin() + row * seed_elems, seed_data.begin() + (row + 1) * seed_elems);
        for (std::size_t i = at + 1; i-- > 0;) {  // i from `at` down to 0
            const Node& n = m.nodes[i];
            const std::vector<std::size_t>& out_shape = shapes[i];
            const std::vector<std::size_t>& in_shape = i == 0 ? m.input_shape : shapes[i - 1];
            std::span<const T> in =
                i == 0 ? std::span<const T>(batch_data.data() + row * in_elems, in_elems)
                       : std::span<const T>(trace.values[i - 1].data<T>().data() +
                                                row * shape_size(in_shape),
                                            shape_size(in_shape));
            gprev.assign(shape_size(in_shape), T(0));
            std::span<T> gwspan, gbspan;
            if (node_has_params(n.kind)) {
                gwspan = gw[i].data<T>();
                gbspan = gb[i].data<T>();
            }
            backprop_node<T>(n, in, in_shape, std::span<const T>(gcur), out_shape,
                             std::span<T>(gprev), gwspan, gbspan);
            if (n.kind == OpKind::Input) {
                auto gi = ginput.data<T>();
                for (std::size_t e = 0; e < in_elems; ++e) gi[row * in_elems + e] += gprev[e];
            }
            gcur.swap(gprev);
        }
    }

    const std::string input_id = m.nodes.front().id;
    if (want_key(input_id))
        grads[input_id] = GradRecord{input_id, std::move(ginput), false};
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        if (!node_has_params(m.nodes[i].kind)) continue;
        const std::string wkey = m.nodes[i].id + ".weight";
        const std::string bkey = m.nodes[i].id + ".bias";
        const bool reachable = i <= at;
        if (want_key(wkey)) grads[wkey] = GradRecord{wkey, std::move(gw[i]), !reachable};
        if (want_key(bkey)) grads[bkey] = GradRecord{bkey, std::move(gb[i]), !reachable};
    }

    // unknown wrt keys
    for (const std::string& key : wrt) {
        if (!grads.count(key)) throw ConfigError("unknown wrt target '" + key + "'");
    }
    return grads;
}

}  // namespace

std::set<std::string, std::less<>> grad_keys(const GraphModel& m) {
    std::set<std::string, std::less<>> keys;
    keys.insert(m.nodes.front().id);
    for (const Node& n : m.nodes) {
        if (node_has_params(n.kind)) {
            keys.insert(n.id + ".weight");
            keys.insert(n.id + ".bias");
        }
    }
    return keys;
}

GradMap vjp(const GraphModel& m, const ForwardTrace& trace, const Tensor& batch,
            std::string_view at_node, const Tensor& seed,
            const std::set<std::string, std::less<>>& wrt) {
    return m.dtype == DType::F32 ? vjp_impl<float>(m, trace, batch, at_node, seed, wrt)
                                 : vjp_impl<double>(m, trace, batch, at_node, seed, wrt);
}

GradMap backward(const GraphModel& m, const Tensor& batch, std::string_view loss_node,
                 const std::set<std::string, std::less<>>& wrt) {
    const auto shapes = infer_shapes(m);
    const std::size_t at = m.index_of(loss_node);
    if (shape_size(shapes[at]) != 1)
        throw ShapeError("loss node '" + std::string(loss_node) + "' is not scalar; its shape is " +
                         shape_str(shapes[at]));
    if (batch_rows(m, batch) != 1)
        throw ShapeError("backward expects a single-row batch for a scalar loss");
    const ForwardTrace trace = forward_reference(m, batch);
    Tensor seed = Tensor::zeros({1, 1}, m.dtype);
    seed.set(0, 1.0);
    return vjp(m, trace, batch, loss_node, seed, wrt);
}

}  // namespace sg
