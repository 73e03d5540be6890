// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "sg/graph.hpp"

namespace sg {

// Little-endian IEEE-754 bit patterns, two hex digits per byte (fp32 1.0 ->
// "0000803f"). Round-trips are bitwise lossless.
std::string tensor_hex(const Tensor& t);
Tensor tensor_from_hex(const std::vector<std::size_t>& shape, DType dtype, std::string_view hex);

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j, const std::string& context);

nlohmann::json model_to_json(const GraphModel& m);
GraphModel model_from_json(const nlohmann::json& j);

std::string serialize_model(const GraphModel& m);
GraphModel deserialize_model(std::string_view text);

void save_model(const std::filesystem::path& path, const GraphModel& m);
GraphModel load_model(const std::filesystem::path& path);

nlohmann::json load_json_file(const std::filesystem::path& path);
void save_json_file(const std::filesystem::path& path, const nlohmann::json& j);

// Shortest round-trip decimal for a double (std::to_chars).
std::string shortest_decimal(double v);

}  // namespace sg
