#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gnnir/autodiff.hpp"

namespace gnnir {

struct GradCheckOptions {
    double step = 1e-5;
    double rel_tolerance = 1e-4;
    // Entries where both analytic and numeric gradients are below this are
    // accepted outright; relative error is meaningless near zero.
    double abs_floor = 1e-8;
};

struct GradCheckReport {
    std::string name;
    double max_rel_err = 0.0;
    std::string worst_entry;
    long long entries = 0;
    bool pass = true;
};

// Central-difference check of every parameter in the store. loss() must
// rebuild the computation from the current parameter values, run backward,
// and return the loss value; the harness zeroes gradients around it.
GradCheckReport check_gradients(const std::string& name, ParamStore& params,
                                const std::function<double()>& loss,
                                const GradCheckOptions& opts = {});

// Deterministic suite covering every differentiable tape op plus three
// composite pipelines (message-passing step, selector, full IR round).
std::vector<GradCheckReport> run_gradient_suite(uint64_t seed);

}  // namespace gnnir
