// SPDX-License-Identifier: Apache-2.0
#include "sg/serialize.hpp"

#include <charconv>
#include <cstring>
#include <fstream>

namespace sg {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

template <typename T>
std::string bytes_to_hex(std::span<const T> vals) {
    std::string out;
    out.reserve(vals.size() * sizeof(T) * 2);
    for (const T& v : vals) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &v, sizeof(T));
        for (unsigned char b : bytes) {
            out.push_back(kHexDigits[b >> 4]);
            out.push_back(kHexDigits[b & 0xf]);
        }
    }
    return out;
}

template <typename T>
std::vector<T> hex_to_values(std::string_view hex, std::size_t count) {
    if (hex.size() != count * sizeof(T) * 2)
        throw SerializationError("payload has " + std::to_string(hex.size()) +
                                 " hex digits, expected " + std::to_string(count * sizeof(T) * 2));
    std::vector<T> vals(count);
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char bytes[sizeof(T)];
        for (std::size_t b = 0; b < sizeof(T); ++b) {
            const int hi = hex_value(hex[(i * sizeof(T) + b) * 2]);
            const int lo = hex_value(hex[(i * sizeof(T) + b) * 2 + 1]);
            if (hi < 0 || lo < 0) throw SerializationError("non-hex character in payload");
            bytes[b] = static_cast<unsigned char>((hi << 4) | lo);
        }
        std::memcpy(&vals[i], bytes, sizeof(T));
    }
    return vals;
}

}  // namespace

std::string tensor_hex(const Tensor& t) {
    if (t.dtype() == DType::F32) return bytes_to_hex(t.data<float>());
    return bytes_to_hex(t.data<double>());
}

Tensor tensor_from_hex(const std::vector<std::size_t>& shape, DType dtype, std::string_view hex) {
    const std::size_t count = shape_size(shape);
    if (dtype == DType::F32) return Tensor::from_f32(shape, hex_to_values<float>(hex, count));
    return Tensor::from_f64(shape, hex_to_values<double>(hex, count));
}

nlohmann::json tensor_to_json(const Tensor& t) {
    return nlohmann::json{
        {"shape", t.shape()}, {"dtype", dtype_name(t.dtype())}, {"data", tensor_hex(t)}};
}

Tensor tensor_from_json(const nlohmann::json& j, const std::string& context) {
    try {
        const auto shape = j.at("shape").get<std::vector<std::size_t>>();
        const DType dt = dtype_from_name(j.at("dtype").get<std::string>());
        return tensor_from_hex(shape, dt, j.at("data").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw SerializationError(context + ": malformed tensor: " + e.what());
    } catch (const SerializationError& e) {
        throw SerializationError(context + ": " + e.what());
    }
}

nlohmann::json model_to_json(const GraphModel& m) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const Node& n : m.nodes) {
        nlohmann::json jn{{"id", n.id}, {"kind", op_kind_name(n.kind)}};
        switch (n.kind) {
            case OpKind::Dense:
                jn["weight"] = tensor_to_json(n.weight);
                jn["bias"] = tensor_to_json(n.bias);
                break;
            case OpKind::Conv2d:
                jn["kernels"] = tensor_to_json(n.weight);
                jn["bias"] = tensor_to_json(n.bias);
                jn["stride"] = n.stride;
                jn["pad"] = n.pad;
                break;
            case OpKind::AffinePerChannel:
                jn["scale"] = tensor_to_json(n.weight);
                jn["shift"] = tensor_to_json(n.bias);
                break;
            case OpKind::SubConst:
            case OpKind::DivConst: {
                // constant stored bit-exactly in the model dtype
                Tensor c = m.dtype == DType::F32 ? Tensor::scalar(static_cast<float>(n.cval))
                                                 : Tensor::scalar(n.cval);
                jn["value"] = tensor_to_json(c);
                break;
            }
            default:
                break;
        }
        if (n.reduce_block != 0) jn["reduce_block"] = n.reduce_block;
        if (n.bias_preload) jn["bias_preload"] = true;
        if (n.fma_contract) jn["fma"] = true;
        nodes.push_back(std::move(jn));
    }
    return nlohmann::json{{"format", "sgmodel/1"},
                          {"dtype", dtype_name(m.dtype)},
                          {"input_shape", m.input_shape},
                          {"class_count", m.class_count},
                          {"nodes", std::move(nodes)}};
}

GraphModel model_from_json(const nlohmann::json& j) {
    GraphModel m;
    try {
        if (j.at("format").get<std::string>() != "sgmodel/1")
            throw SerializationError("unsupported model format");
        m.dtype = dtype_from_name(j.at("dtype").get<std::string>());
        m.input_shape = j.at("input_shape").get<std::vector<std::size_t>>();
        m.class_count = j.at("class_count").get<std::size_t>();
        for (const auto& jn : j.at("nodes")) {
            Node n;
            n.id = jn.at("id").get<std::string>();
            n.kind = op_kind_from_name(jn.at("kind").get<std::string>());
            switch (n.kind) {
                case OpKind::Dense:
                    n.weight = tensor_from_json(jn.at("weight"), "node '" + n.id + "'");
                    n.bias = tensor_from_json(jn.at("bias"), "node '" + n.id + "'");
                    break;
                case OpKind::Conv2d:
                    n.weight = tensor_from_json(jn.at("kernels"), "node '" + n.id + "'");
                    n.bias = tensor_from_json(jn.at("bias"), "node '" + n.id + "'");
                    n.stride = jn.at("stride").get<int>();
                    n.pad = jn.at("pad").get<int>();
                    break;
                case OpKind::AffinePerChannel:
                    n.weight = tensor_from_json(jn.at("scale"), "node '" + n.id + "'");
                    n.bias = tensor_from_json(jn.at("shift"), "node '" + n.id + "'");
                    break;
                case OpKind::SubConst:
                case OpKind::DivConst: {
                    const Tensor c = tensor_from_json(jn.at("value"), "node '" + n.id + "'");
                    n.cval = c.at(0);
                    break;
                }
                default:
                    break;
            }
            if (jn.contains("reduce_block")) n.reduce_block = jn["reduce_block"].get<std::size_t>();
            if (jn.contains("bias_preload")) n.bias_preload = jn["bias_preload"].get<bool>();
            if (jn.contains("fma")) n.fma_contract = jn["fma"].get<bool>();
            m.nodes.push_back(std::move(n));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SerializationError(std::string("malformed model manifest: ") + e.what());
    }
    infer_shapes(m);  // shape mismatch surfaces here
    return m;
}

std::string serialize_model(const GraphModel& m) { return model_to_json(m).dump(2); }

GraphModel deserialize_model(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw SerializationError("model manifest is not valid JSON");
    return model_from_json(j);
}

void save_model(const std::filesystem::path& path, const GraphModel& m) {
    std::ofstream f(path);
    if (!f) throw SerializationError("cannot open '" + path.string() + "' for writing");
    f << serialize_model(m) << '\n';
}

GraphModel load_model(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw SerializationError("cannot open model file '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_model(text);
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open '" + path.string() + "'");
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
    if (j.is_discarded()) throw ConfigError("'" + path.string() + "' is not valid JSON");
    return j;
}

void save_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open '" + path.string() + "' for writing");
    f << j.dump(2) << '\n';
}

std::string shortest_decimal(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

}  // namespace sg
