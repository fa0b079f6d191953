#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "grn/tensor.hpp"

namespace grn {

/// Builds a scalar from the given inputs; must be a pure function of their values.
using ScalarFunction = std::function<ad::Tensor(std::span<const ad::Tensor>)>;

/**
 * Compares reverse-mode gradients of `f` with central differences for every
 * input that requires gradients. Returns the worst per-input error
 * max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-6); below the
 * floor the comparison is effectively absolute, which keeps finite-difference
 * noise on exactly-zero gradients from reading as a failure.
 */
double gradient_error(const ScalarFunction& f, std::span<ad::Tensor> inputs, double step = 1e-5);

struct GradcheckOptions {
    std::uint64_t seed = 0;
    std::size_t instances = 20;
    double step = 1e-5;
    double tolerance = 1e-4;
};

struct GradcheckResult {
    std::string op;
    std::size_t instances = 0;
    double max_error = 0.0;
    bool passed = false;
};

/// Every exported operator plus full two-layer encode -> decode -> BCE composites.
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options = {});

} // namespace grn
