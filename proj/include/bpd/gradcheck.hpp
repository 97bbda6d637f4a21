#pragma once

// Central finite-difference gradient checking against the tape's analytic
// gradients. Runs at 64-bit precision regardless of the training scalar.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bpd/tensor.hpp"

namespace bpd {

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// fn maps the inputs to a scalar tensor; it is re-evaluated for every probe.
inline GradCheckResult grad_check(
    const std::string& name,
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& fn,
    const std::vector<Shape>& input_shapes, double tolerance = 1e-3,
    unsigned seed = 1234, double eps = 1e-4) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    std::vector<Tensor<double>> inputs;
    inputs.reserve(input_shapes.size());
    for (const auto& s : input_shapes) {
        Tensor<double> t = Tensor<double>::zeros(s);
        for (auto& v : t.values()) v = u(rng);
        t.set_requires_grad(true);
        inputs.push_back(t);
    }

    // analytic gradients
    {
        Tape<double> tape;
        Tensor<double> out = fn(inputs);
        tape.backward(out);
    }

    GradCheckResult res;
    res.name = name;
    res.tolerance = tolerance;
    for (auto& input : inputs) {
        for (std::size_t i = 0; i < input.size(); ++i) {
            const double orig = input.values()[i];
            input.values()[i] = orig + eps;
            const double fp = fn(inputs).item();
            input.values()[i] = orig - eps;
            const double fm = fn(inputs).item();
            input.values()[i] = orig;
            const double fd = (fp - fm) / (2.0 * eps);
            const double analytic = input.grad()[i];
            const double rel = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
            res.max_rel_error = std::max(res.max_rel_error, rel);
        }
    }
    res.passed = res.max_rel_error < tolerance;
    return res;
}

} // namespace bpd
