// SPDX-License-Identifier: Apache-2.0
#include "sg/deviation.hpp"

#include <cmath>

#include "sg/serialize.hpp"

namespace sg {

namespace {

struct PairRun {
    Tensor ref;
    Tensor opt;
    std::size_t rows;
    std::size_t cols;
};

PairRun run_pair(const GraphModel& m, const CompilePlan& plan, const Tensor& inputs) {
    if (inputs.shape().empty() || inputs.shape()[0] == 0)
        throw ConfigError("deviation study needs a nonempty input sample");
    PairRun pr{run_reference(m, inputs), run_optimized(plan, inputs), 0, 0};
    if (pr.ref.has_nan() || pr.opt.has_nan()) throw NumericError("NaN in executor outputs");
    pr.rows = pr.ref.shape()[0];
    pr.cols = pr.ref.size() / pr.rows;
    if (pr.ref.shape() != pr.opt.shape())
        throw ShapeError("executor outputs disagree in shape");
    return pr;
}

}  // namespace

double max_deviation(const GraphModel& m, const CompilePlan& plan, const Tensor& inputs) {
    const PairRun pr = run_pair(m, plan, inputs);
    double mx = 0.0;
    for (std::size_t i = 0; i < pr.ref.size(); ++i)
        mx = std::max(mx, std::abs(pr.opt.at(i) - pr.ref.at(i)));
    return mx == 0.0 ? -std::numeric_limits<double>::infinity() : std::log10(mx);
}

DeviationReport check_equivalence(const GraphModel& m, const CompilePlan& plan,
                                  const Tensor& inputs) {
    const PairRun pr = run_pair(m, plan, inputs);
    DeviationReport r;
    r.sample_size = pr.rows;
    r.per_input_linf.resize(pr.rows, 0.0);
    double mx = 0.0;
    for (std::size_t row = 0; row < pr.rows; ++row) {
        double v = 0.0;
        for (std::size_t c = 0; c < pr.cols; ++c) {
            const std::size_t i = row * pr.cols + c;
            v = std::max(v, std::abs(pr.opt.at(i) - pr.ref.at(i)));
        }
        r.per_input_linf[row] = v;
        mx = std::max(mx, v);
    }
    r.max_linf = mx;
    r.delta = mx == 0.0 ? -std::numeric_limits<double>::infinity() : std::log10(mx);
    r.semantic_equivalent = mx == 0.0;

    const auto pref = predict(pr.ref);
    const auto popt = predict(pr.opt);
    for (std::size_t row = 0; row < pr.rows; ++row)
        if (pref[row] != popt[row]) r.disagreement_indices.push_back(row);
    r.consistency_rate =
        1.0 - static_cast<double>(r.disagreement_indices.size()) / static_cast<double>(pr.rows);
    r.observable_decision_equivalent = r.disagreement_indices.empty();
    r.provenance = plan.provenance();
    return r;
}

double consistency_rate(const GraphModel& m, const CompilePlan& plan, const Tensor& inputs) {
    return check_equivalence(m, plan, inputs).consistency_rate;
}

nlohmann::json report_to_json(const DeviationReport& r) {
    nlohmann::json j;
    j["sample_size"] = r.sample_size;
    j["per_input_linf"] = r.per_input_linf;
    if (std::isinf(r.delta) && r.delta < 0) {
        j["delta"] = "-inf";
    } else {
        j["delta"] = r.delta;
    }
    {
        std::uint64_t bits;
        static_assert(sizeof(double) == 8);
        std::memcpy(&bits, &r.delta, 8);
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
        j["delta_hex"] = buf;
    }
    j["max_linf"] = r.max_linf;
    j["max_linf_decimal"] = shortest_decimal(r.max_linf);
    j["semantic_equivalent"] = r.semantic_equivalent;
    // Def. 2 is undecidable by sampling; only its observable (Def. 3)
    // approximation is reported.
    j["observable_decision_equivalent"] = r.observable_decision_equivalent;
    j["decision_equivalence_basis"] = "observable-sample";
    j["disagreement_indices"] = r.disagreement_indices;
    j["consistency_rate"] = r.consistency_rate;
    j["provenance"] = r.provenance;
    return j;
}

}  // namespace sg
