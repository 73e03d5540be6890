// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include <json.hpp>

#include "sg/exec.hpp"

namespace sg {

// Simulated backend configuration. JSON form:
//   {"passes": ["fold_affine","reassociate"], "block": 4, "fma": false}
// bias_preload (default true) controls the Dense epilogue fusion applied by
// the reassociation pass.
struct CompileConfig {
    std::vector<std::string> passes{"fold_affine", "reassociate"};
    std::size_t block = 4;
    bool fma = false;
    bool bias_preload = true;

    static CompileConfig identity() { return CompileConfig{{}, 4, false, true}; }
    static CompileConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct CompilePlan {
    std::uint64_t source_hash = 0;
    CompileConfig config;
    GraphModel rewritten;
    std::uint64_t plan_hash = 0;
    std::vector<std::string> pass_log;

    nlohmann::json provenance() const;
};

// Folds maximal chains of {AffinePerChannel, SubConst, DivConst} into a
// single AffinePerChannel (constants composed once in the parameter width)
// and absorbs scale-1 affine shifts into an adjacent Dense/Conv2d bias.
GraphModel pass_fold_affine(const GraphModel& m);

// Marks every Dense/Conv2d reduction to run blocked (dot_blocked semantics)
// and, for Dense, pre-loads the bias into accumulator block 0.
GraphModel pass_reassociate(const GraphModel& m, std::size_t block, bool bias_preload);

// Marks Dense/Conv2d reductions to contract each multiply-add into one fma.
GraphModel pass_fma_contract(const GraphModel& m);

CompilePlan compile_model(const GraphModel& m, const CompileConfig& config);

Tensor run_optimized(const CompilePlan& plan, const Tensor& batch);
ForwardTrace forward_optimized(const CompilePlan& plan, const Tensor& batch);

// Pass-by-pass textual diff of the rewrite (the `inspect` subcommand).
std::string inspect_passes(const GraphModel& m, const CompileConfig& config);

std::uint64_t hash_bytes(std::string_view bytes);
std::uint64_t model_hash(const GraphModel& m);

}  // namespace sg
