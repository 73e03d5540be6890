// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "sg/compile.hpp"

namespace sg {

// Study instruments over a (reference, optimized) executor pair.
// delta = log10(max_i Linf(C(x_i) - M(x_i))); -inf when the max is exactly 0.
struct DeviationReport {
    std::vector<double> per_input_linf;
    double delta = -std::numeric_limits<double>::infinity();
    double max_linf = 0.0;
    bool semantic_equivalent = false;
    bool observable_decision_equivalent = false;
    std::vector<std::size_t> disagreement_indices;
    double consistency_rate = 1.0;
    std::size_t sample_size = 0;
    nlohmann::json provenance;
};

double max_deviation(const GraphModel& m, const CompilePlan& plan, const Tensor& inputs);
DeviationReport check_equivalence(const GraphModel& m, const CompilePlan& plan,
                                  const Tensor& inputs);
double consistency_rate(const GraphModel& m, const CompilePlan& plan, const Tensor& inputs);

// Report schema: floats as shortest round-trip decimals; delta additionally
// as IEEE-754 hex bits; -inf serialized as the string "-inf".
nlohmann::json report_to_json(const DeviationReport& r);

}  // namespace sg
