// SPDX-License-Identifier: Apache-2.0
#include "sg/compile.hpp"

#include <sstream>

#include "sg/serialize.hpp"

namespace sg {

CompileConfig CompileConfig::from_json(const nlohmann::json& j) {
    CompileConfig c;
    try {
        if (j.contains("passes")) c.passes = j["passes"].get<std::vector<std::string>>();
        if (j.contains("block")) c.block = j["block"].get<std::size_t>();
        if (j.contains("fma")) c.fma = j["fma"].get<bool>();
        if (j.contains("bias_preload")) c.bias_preload = j["bias_preload"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad compile config: ") + e.what());
    }
    for (const std::string& p : c.passes)
        if (p != "fold_affine" && p != "reassociate")
            throw ConfigError("unknown pass '" + p + "'");
    if (c.block < 2) throw ConfigError("compile config: block must be >= 2");
    return c;
}

nlohmann::json CompileConfig::to_json() const {
    return nlohmann::json{
        {"passes", passes}, {"block", block}, {"fma", fma}, {"bias_preload", bias_preload}};
}

nlohmann::json CompilePlan::provenance() const {
    std::ostringstream sh, ph;
    sh << std::hex << source_hash;
    ph << std::hex << plan_hash;
    return nlohmann::json{
        {"source_hash", sh.str()}, {"plan_hash", ph.str()}, {"config", config.to_json()}};
}

namespace {

bool foldable(OpKind k) {
    return k == OpKind::AffinePerChannel || k == OpKind::SubConst || k == OpKind::DivConst;
}

// Compose a run of affine-like nodes into per-channel (scale, shift),
// rounding each arithmetic step once in T.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> compose_run(const GraphModel& m, std::size_t begin,
                                                      std::size_t end, std::size_t channels) {
    std::vector<T> scale(channels, T(1));
    std::vector<T> shift(channels, T(0));
    for (std::size_t i = begin; i < end; ++i) {
        const Node& n = m.nodes[i];
        switch (n.kind) {
            case OpKind::AffinePerChannel: {
                const auto a = n.weight.data<T>();
                const auto b = n.bias.data<T>();
                for (std::size_t c = 0; c < channels; ++c) {
                    const T s = a[c] * scale[c];
                    const T h0 = a[c] * shift[c];
                    scale[c] = s;
                    shift[c] = h0 + b[c];
                }
                break;
            }
            case OpKind::SubConst: {
                const T cv = static_cast<T>(n.cval);
                for (std::size_t c = 0; c < channels; ++c) shift[c] = shift[c] - cv;
                break;
            }
            case OpKind::DivConst: {
                const T cv = static_cast<T>(n.cval);
                if (cv == T(0))
                    throw NumericError("pass_fold_affine: division by zero in '" + n.id + "'");
                for (std::size_t c = 0; c < channels; ++c) {
                    scale[c] = scale[c] / cv;
                    shift[c] = shift[c] / cv;
                }
                break;
            }
            default:
                break;
        }
    }
    return {std::move(scale), std::move(shift)};
}

template <typename T>
bool all_equal(std::span<const T> v, T x) {
    for (const T& e : v)
        if (e != x) return false;
    return true;
}

std::string describe_node(const GraphModel& m, const Node& n) {
    std::ostringstream os;
    os << n.id << ":" << op_kind_name(n.kind);
    auto dump_scalar = [&](const Tensor& t) {
        os << "[";
        for (std::size_t i = 0; i < std::min<std::size_t>(t.size(), 4); ++i)
            os << (i ? "," : "") << shortest_decimal(t.at(i));
        if (t.size() > 4) os << ",..";
        os << "]";
    };
    switch (n.kind) {
        case OpKind::AffinePerChannel:
            os << "(scale=";
            dump_scalar(n.weight);
            os << " hex=" << tensor_hex(n.weight) << ", shift=";
            dump_scalar(n.bias);
            os << " hex=" << tensor_hex(n.bias) << ")";
            break;
        case OpKind::SubConst:
        case OpKind::DivConst: {
            Tensor c = m.dtype == DType::F32 ? Tensor::scalar(static_cast<float>(n.cval))
                                             : Tensor::scalar(n.cval);
            os << "(c=" << shortest_decimal(n.cval) << " hex=" << tensor_hex(c) << ")";
            break;
        }
        case OpKind::Dense:
            os << "(out=" << n.weight.shape()[0] << ", in=" << n.weight.shape()[1] << ")";
            break;
        case OpKind::Conv2d:
            os << "(kernels=" << shape_str(n.weight.shape()) << ", stride=" << n.stride
               << ", pad=" << n.pad << ")";
            break;
        default:
            break;
    }
    if (n.reduce_block) os << " blocked(B=" << n.reduce_block << ")";
    if (n.bias_preload) os << " bias-preload";
    if (n.fma_contract) os << " fma";
    return os.str();
}

}  // namespace

GraphModel pass_fold_affine(const GraphModel& m) {
    const auto shapes = infer_shapes(m);
    GraphModel out;
    out.input_shape = m.input_shape;
    out.class_count = m.class_count;
    out.dtype = m.dtype;

    std::size_t i = 0;
    std::size_t fold_id = 0;
    while (i < m.nodes.size()) {
        if (!foldable(m.nodes[i].kind)) {
            out.nodes.push_back(m.nodes[i]);
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < m.nodes.size() && foldable(m.nodes[j].kind)) ++j;
        if (j - i == 1 && m.nodes[i].kind == OpKind::AffinePerChannel) {
            out.nodes.push_back(m.nodes[i]);  // lone affine: nothing to fold
            i = j;
            continue;
        }
        const std::size_t channels = channel_count(i == 0 ? m.input_shape : shapes[i - 1]);
        Node folded;
        folded.id = "affine-fused-" + std::to_string(fold_id++);
        folded.kind = OpKind::AffinePerChannel;
        if (m.dtype == DType::F32) {
            auto [scale, shift] = compose_run<float>(m, i, j, channels);
            folded.weight = Tensor::from_f32({channels}, std::move(scale));
            folded.bias = Tensor::from_f32({channels}, std::move(shift));
        } else {
            auto [scale, shift] = compose_run<double>(m, i, j, channels);
            folded.weight = Tensor::from_f64({channels}, std::move(scale));
            folded.bias = Tensor::from_f64({channels}, std::move(shift));
        }
        out.nodes.push_back(std::move(folded));
        i = j;
    }

    // Absorb scale-1 affine shifts into the preceding layer bias.
    GraphModel absorbed;
    absorbed.input_shape = out.input_shape;
    absorbed.class_count = out.class_count;
    absorbed.dtype = out.dtype;
    for (Node& n : out.nodes) {
        bool merged = false;
        if (n.kind == OpKind::AffinePerChannel && !absorbed.nodes.empty()) {
            Node& prev = absorbed.nodes.back();
            const bool prev_biased = prev.kind == OpKind::Dense || prev.kind == OpKind::Conv2d;
            const bool unit_scale = out.dtype == DType::F32
                                        ? all_equal<float>(n.weight.data<float>(), 1.0f)
                                        : all_equal<double>(n.weight.data<double>(), 1.0);
            if (prev_biased && unit_scale && prev.bias.size() == n.bias.size()) {
                if (out.dtype == DType::F32) {
                    auto b = prev.bias.data<float>();
                    auto s = n.bias.data<float>();
                    for (std::size_t c = 0; c < b.size(); ++c) b[c] = b[c] + s[c];
                } else {
                    auto b = prev.bias.data<double>();
                    auto s = n.bias.data<double>();
                    for (std::size_t c = 0; c < b.size(); ++c) b[c] = b[c] + s[c];
                }
                merged = true;
            }
        }
        if (!merged) absorbed.nodes.push_back(std::move(n));
    }
    infer_shapes(absorbed);
    return absorbed;
}

GraphModel pass_reassociate(const GraphModel& m, std::size_t block, bool bias_preload) {
    if (block < 2) throw ConfigError("pass_reassociate: block must be >= 2");
    GraphModel out = m;
    for (Node& n : out.nodes) {
        if (n.kind == OpKind::Dense) {
            n.reduce_block = block;
            n.bias_preload = bias_preload;
        } else if (n.kind == OpKind::Conv2d) {
            n.reduce_block = block;
        }
    }
    return out;
}

GraphModel pass_fma_contract(const GraphModel& m) {
    GraphModel out = m;
    for (Node& n : out.nodes)
        if (n.kind == OpKind::Dense || n.kind == OpKind::Conv2d) n.fma_contract = true;
    return out;
}

std::uint64_t hash_bytes(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t model_hash(const GraphModel& m) { return hash_bytes(serialize_model(m)); }

CompilePlan compile_model(const GraphModel& m, const CompileConfig& config) {
    CompilePlan plan;
    plan.source_hash = model_hash(m);
    plan.config = config;
    plan.rewritten = m;
    for (const std::string& p : config.passes) {
        if (p == "fold_affine") {
            plan.rewritten = pass_fold_affine(plan.rewritten);
            plan.pass_log.push_back("fold_affine");
        } else if (p == "reassociate") {
            plan.rewritten = pass_reassociate(plan.rewritten, config.block, config.bias_preload);
            plan.pass_log.push_back("reassociate(B=" + std::to_string(config.block) +
                                    (config.bias_preload ? ",bias-preload" : "") + ")");
        } else {
            throw ConfigError("unknown pass '" + p + "'");
        }
    }
    if (config.fma) {
        plan.rewritten = pass_fma_contract(plan.rewritten);
        plan.pass_log.push_back("fma_contract");
    }
    plan.plan_hash = hash_bytes(serialize_model(plan.rewritten) + config.to_json().dump());
    return plan;
}

Tensor run_optimized(const CompilePlan& plan, const Tensor& batch) {
    return run_marked(plan.rewritten, batch);
}

ForwardTrace forward_optimized(const CompilePlan& plan, const Tensor& batch) {
    return forward_marked(plan.rewritten, batch);
}

std::string inspect_passes(const GraphModel& m, const CompileConfig& config) {
    std::ostringstream os;
    auto dump = [&](const GraphModel& g, const std::string& title) {
        os << title << "\n";
        for (const Node& n : g.nodes) os << "  " << describe_node(g, n) << "\n";
    };
    dump(m, "source graph");
    GraphModel cur = m;
    for (const std::string& p : config.passes) {
        if (p == "fold_affine") {
            cur = pass_fold_affine(cur);
            dump(cur, "after fold_affine");
        } else if (p == "reassociate") {
            cur = pass_reassociate(cur, config.block, config.bias_preload);
            dump(cur, "after reassociate(B=" + std::to_string(config.block) + ")");
        }
    }
    if (config.fma) {
        cur = pass_fma_contract(cur);
        dump(cur, "after fma_contract");
    }
    return os.str();
}

}  // namespace sg
