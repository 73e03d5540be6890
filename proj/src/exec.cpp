// SPDX-License-Identifier: Apache-2.0
#include "sg/exec.hpp"

#include <algorithm>
#include <cmath>

namespace sg {

namespace {

struct ExecMode {
    bool use_marks = false;
};

// Gathers the in-bounds taps of one conv output position in canonical
// (channel, kernel-row, kernel-col) order. Out-of-bounds (padding) taps are
// skipped entirely: they contribute neither a product nor an add.
template <typename T>
void gather_taps(std::span<const T> image, std::size_t ic, std::size_t ih, std::size_t iw,
                 std::span<const T> kernel, std::size_t kh, std::size_t kw, long r0, long c0,
                 std::vector<T>& xs, std::vector<T>& ws) {
    xs.clear();
    ws.clear();
    for (std::size_t c = 0; c < ic; ++c) {
        for (std::size_t kr = 0; kr < kh; ++kr) {
            const long r = r0 + static_cast<long>(kr);
            if (r < 0 || r >= static_cast<long>(ih)) continue;
            for (std::size_t kc = 0; kc < kw; ++kc) {
                const long cc = c0 + static_cast<long>(kc);
                if (cc < 0 || cc >= static_cast<long>(iw)) continue;
                xs.push_back(image[(c * ih + static_cast<std::size_t>(r)) * iw +
                                   static_cast<std::size_t>(cc)]);
                ws.push_back(kernel[(c * kh + kr) * kw + kc]);
            }
        }
    }
}

template <typename T>
void eval_node(const Node& n, ExecMode mode, std::span<const T> in,
               const std::vector<std::size_t>& in_shape, std::span<T> out,
               const std::vector<std::size_t>& out_shape) {
    const std::size_t block = mode.use_marks ? n.reduce_block : 0;
    const bool fma = mode.use_marks && n.fma_contract;
    const bool preload = mode.use_marks && n.bias_preload;

    switch (n.kind) {
        case OpKind::Input:
        case OpKind::Output:
        case OpKind::Flatten:
            std::copy(in.begin(), in.end(), out.begin());
            break;
        case OpKind::Relu:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
            break;
        case OpKind::SubConst: {
            const T c = static_cast<T>(n.cval);
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] - c;
            break;
        }
        case OpKind::DivConst: {
            const T c = static_cast<T>(n.cval);
            if (c == T(0)) throw NumericError("DivConst '" + n.id + "': division by zero");
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] / c;
            break;
        }
        case OpKind::AffinePerChannel: {
            const auto scale = n.weight.data<T>();
            const auto shift = n.bias.data<T>();
            const std::size_t ch = channel_count(in_shape);
            const std::size_t per = in.size() / ch;
            for (std::size_t c = 0; c < ch; ++c) {
                for (std::size_t i = 0; i < per; ++i) {
                    const T p = in[c * per + i] * scale[c];
                    out[c * per + i] = p + shift[c];
                }
            }
            break;
        }
        case OpKind::Dense: {
            const auto w = n.weight.data<T>();
            const auto b = n.bias.data<T>();
            const std::size_t out_n = n.weight.shape()[0];
            const std::size_t in_n = n.weight.shape()[1];
            for (std::size_t o = 0; o < out_n; ++o) {
                std::span<const T> row(w.data() + o * in_n, in_n);
                if (preload) {
                    out[o] = reduce_dot<T>(in, row, block, fma, b[o]);
                } else {
                    const T acc = reduce_dot<T>(in, row, block, fma, T(0));
                    out[o] = acc + b[o];
                }
            }
            break;
        }
        case OpKind::Conv2d: {
            const auto k = n.weight.data<T>();
            const auto b = n.bias.data<T>();
            const auto& ks = n.weight.shape();
            const std::size_t oc = ks[0], ic = ks[1], kh = ks[2], kw = ks[3];
            const std::size_t ih = in_shape[1], iw = in_shape[2];
            const std::size_t oh = out_shape[1], ow = out_shape[2];
            thread_local std::vector<T> xs, ws;
            for (std::size_t o = 0; o < oc; ++o) {
                std::span<const T> kernel(k.data() + o * ic * kh * kw, ic * kh * kw);
                for (std::size_t r = 0; r < oh; ++r) {
                    for (std::size_t c = 0; c < ow; ++c) {
                        const long r0 = static_cast<long>(r) * n.stride - n.pad;
                        const long c0 = static_cast<long>(c) * n.stride - n.pad;
                        gather_taps<T>(in, ic, ih, iw, kernel, kh, kw, r0, c0, xs, ws);
                        const T acc = reduce_dot<T>(std::span<const T>(xs),
                                                    std::span<const T>(ws), block, fma, T(0));
                        out[(o * oh + r) * ow + c] = acc + b[o];
                    }
                }
            }
            break;
        }
    }
}

template <typename T>
ForwardTrace forward_impl(const GraphModel& m, const Tensor& batch, ExecMode mode) {
    const auto shapes = infer_shapes(m);
    const std::size_t n = batch_rows(m, batch);
    const std::size_t in_elems = shape_size(m.input_shape);

    ForwardTrace trace;
    trace.values.reserve(m.nodes.size());
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        std::vector<std::size_t> s = shapes[i];
        s.insert(s.begin(), n);
        trace.values.push_back(Tensor::zeros(std::move(s), m.dtype));
    }

    const auto in_all = batch.data<T>();
    for (std::size_t row = 0; row < n; ++row) {
        std::span<const T> cur(in_all.data() + row * in_elems, in_elems);
        std::vector<std::size_t> cur_shape = m.input_shape;
        for (std::size_t i = 0; i < m.nodes.size(); ++i) {
            const std::size_t out_elems = shape_size(shapes[i]);
            auto out_all = trace.values[i].data<T>();
            std::span<T> out(out_all.data() + row * out_elems, out_elems);
            eval_node<T>(m.nodes[i], mode, cur, cur_shape, out, shapes[i]);
            cur = out;
            cur_shape = shapes[i];
        }
    }
    return trace;
}

ForwardTrace forward_any(const GraphModel& m, const Tensor& batch, ExecMode mode) {
    if (batch.dtype() != m.dtype)
        throw ShapeError(std::string("batch dtype ") + dtype_name(batch.dtype()) +
                         " does not match model dtype " + dtype_name(m.dtype));
    ForwardTrace t = m.dtype == DType::F32 ? forward_impl<float>(m, batch, mode)
                                           : forward_impl<double>(m, batch, mode);
    if (t.values.back().has_nan())
        throw NumericError("NaN in model output");
    return t;
}

}  // namespace

std::size_t batch_rows(const GraphModel& m, const Tensor& batch) {
    const auto& s = batch.shape();
    if (s.size() != m.input_shape.size() + 1 ||
        !std::equal(m.input_shape.begin(), m.input_shape.end(), s.begin() + 1))
        throw ShapeError("batch shape " + shape_str(s) + " does not match [N]+" +
                         shape_str(m.input_shape));
    return s[0];
}

ForwardTrace forward_reference(const GraphModel& m, const Tensor& batch) {
    return forward_any(m, batch, ExecMode{false});
}

Tensor run_reference(const GraphModel& m, const Tensor& batch) {
    return forward_reference(m, batch).values.back();
}

ForwardTrace forward_marked(const GraphModel& m, const Tensor& batch) {
    return forward_any(m, batch, ExecMode{true});
}

Tensor run_marked(const GraphModel& m, const Tensor& batch) {
    return forward_marked(m, batch).values.back();
}

std::vector<std::size_t> predict(const Tensor& logits) {
    const auto& s = logits.shape();
    if (s.size() != 2) throw ShapeError("predict expects [N,k] logits, got " + shape_str(s));
    const std::size_t n = s[0], k = s[1];
    if (k == 0) throw ShapeError("predict: zero classes");
    std::vector<std::size_t> out(n);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t best = 0;
        double best_v = logits.at(r * k);
        if (std::isnan(best_v)) throw NumericError("NaN logit at row " + std::to_string(r));
        for (std::size_t c = 1; c < k; ++c) {
            const double v = logits.at(r * k + c);
            if (std::isnan(v)) throw NumericError("NaN logit at row " + std::to_string(r));
            if (v > best_v) {  // ties keep the lowest index
                best_v = v;
                best = c;
            }
        }
        out[r] = best;
    }
    return out;
}

}  // namespace sg
