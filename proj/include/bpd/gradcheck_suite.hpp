#pragma once

// The full finite-difference suite: every primitive and every loss
// composite, each on several seeded random shapes at 64-bit precision.

#include <functional>
#include <vector>

#include "bpd/gradcheck.hpp"
#include "bpd/layers.hpp"
#include "bpd/losses.hpp"
#include "bpd/nets.hpp"
#include "bpd/tensor.hpp"

namespace bpd {

struct GradCheckCase {
    std::string name;
    std::function<Tensor<double>(const std::vector<Tensor<double>>&)> fn;
    std::vector<Shape> shapes;
};

inline std::vector<GradCheckCase> gradcheck_cases() {
    using T = Tensor<double>;
    using Args = std::vector<T>;
    std::vector<GradCheckCase> cases;
    auto scalarize = [](const T& t) { return mean(square(t)); };

    cases.push_back({"add", [=](const Args& a) { return scalarize(add(a[0], a[1])); },
                     {{2, 3}, {2, 3}}});
    cases.push_back({"add_broadcast", [=](const Args& a) { return scalarize(add(a[0], a[1])); },
                     {{4, 3}, {3}}});
    cases.push_back({"sub", [=](const Args& a) { return scalarize(sub(a[0], a[1])); },
                     {{2, 4}, {2, 4}}});
    cases.push_back({"mul", [=](const Args& a) { return scalarize(mul(a[0], a[1])); },
                     {{3, 3}, {3, 3}}});
    cases.push_back({"mul_broadcast", [=](const Args& a) { return scalarize(mul(a[0], a[1])); },
                     {{4, 2}, {2}}});
    cases.push_back({"div",
                     [=](const Args& a) {
                         return scalarize(div(a[0], add_scalar(a[1], 3.0)));
                     },
                     {{3, 2}, {3, 2}}});
    cases.push_back({"matmul", [=](const Args& a) { return scalarize(matmul(a[0], a[1])); },
                     {{3, 4}, {4, 2}}});
    cases.push_back({"conv1d",
                     [=](const Args& a) { return scalarize(conv1d(a[0], a[1], a[2])); },
                     {{2, 3, 10}, {4, 3, 3}, {4}}});
    cases.push_back({"maxpool1d", [=](const Args& a) { return scalarize(maxpool1d(a[0], 2)); },
                     {{2, 3, 9}}});
    cases.push_back({"relu", [=](const Args& a) { return scalarize(relu(a[0])); }, {{3, 5}}});
    cases.push_back({"sigmoid", [=](const Args& a) { return scalarize(sigmoid(a[0])); }, {{3, 5}}});
    cases.push_back({"tanh", [=](const Args& a) { return scalarize(tanh_t(a[0])); }, {{3, 5}}});
    cases.push_back({"exp", [=](const Args& a) { return scalarize(exp_t(a[0])); }, {{3, 4}}});
    cases.push_back({"log", [=](const Args& a) { return scalarize(log_t(add_scalar(a[0], 2.0))); },
                     {{3, 4}}});
    cases.push_back({"sqrt",
                     [=](const Args& a) { return scalarize(sqrt_t(add_scalar(a[0], 2.0))); },
                     {{3, 4}}});
    cases.push_back({"square", [=](const Args& a) { return mean(square(a[0])); }, {{3, 4}}});
    cases.push_back({"neg", [=](const Args& a) { return scalarize(neg(a[0])); }, {{3, 4}}});
    cases.push_back({"scale", [=](const Args& a) { return scalarize(scale(a[0], 2.5)); }, {{3, 4}}});
    cases.push_back({"clamp_min",
                     [=](const Args& a) { return scalarize(clamp_min(a[0], 0.25)); }, {{4, 4}}});
    cases.push_back({"sum", [=](const Args& a) { return square(sum(a[0])); }, {{3, 4}}});
    cases.push_back({"mean", [=](const Args& a) { return square(mean(a[0])); }, {{3, 4}}});
    cases.push_back({"mean_axis0",
                     [=](const Args& a) { return scalarize(mean_axis0(a[0])); }, {{5, 3}}});
    cases.push_back({"sum_last", [=](const Args& a) { return scalarize(sum_last(a[0])); },
                     {{4, 3}}});
    cases.push_back({"reshape",
                     [=](const Args& a) { return scalarize(reshape(a[0], {3, 8})); }, {{2, 3, 4}}});
    cases.push_back({"concat", [=](const Args& a) { return scalarize(concat(a[0], a[1])); },
                     {{3, 2}, {3, 4}}});
    cases.push_back({"permute_rows",
                     [=](const Args& a) {
                         return scalarize(permute_rows(a[0], {3, 0, 2, 1}));
                     },
                     {{4, 3}}});
    cases.push_back({"select_time",
                     [=](const Args& a) { return scalarize(select_time(a[0], 2)); }, {{2, 3, 5}}});
    cases.push_back({"softmax", [=](const Args& a) { return mean(square(softmax(a[0]))); },
                     {{4, 5}}});
    cases.push_back({"dropout",
                     [=](const Args& a) {
                         std::mt19937 rng(99);
                         return scalarize(dropout(a[0], 0.3, rng));
                     },
                     {{4, 5}}});
    cases.push_back({"batchnorm_train",
                     [=](const Args& a) {
                         T mu = mean_axis0(a[0]);
                         T centered = sub(a[0], mu);
                         T var = mean_axis0(square(centered));
                         T y = add(mul(div(centered, sqrt_t(add_scalar(var, 1e-5))), a[1]), a[2]);
                         return scalarize(y);
                     },
                     {{6, 3}, {3}, {3}}});
    cases.push_back({"lstm_cell",
                     [=](const Args& a) {
                         std::mt19937 rng(7);
                         LstmCellParams<double> p(3, 4, rng);
                         LstmState<double> s{a[1], a[2]};
                         LstmState<double> out = lstm_cell(p, a[0], s);
                         return add(scalarize(out.h), scalarize(out.c));
                     },
                     {{2, 3}, {2, 4}, {2, 4}}});

    // loss composites (Eqs. 1, 2, 3, 5) driven from free logits
    const std::vector<int> labels5{1, 3, 2, 4, 1};
    cases.push_back({"softmax_cross_entropy",
                     [=](const Args& a) {
                         T p = softmax(a[0]);
                         T onehot = one_hot<double>(labels5, 4);
                         return neg(mean(sum_last(mul(onehot, log_t(clamp_min(p, kProbFloor))))));
                     },
                     {{5, 4}}});
    cases.push_back({"ce_loss",
                     [=](const Args& a) {
                         return ce_loss(softmax(a[0]), softmax(a[1]), labels5);
                     },
                     {{5, 4}, {5, 4}}});
    cases.push_back({"ne_loss", [=](const Args& a) { return ne_loss(softmax(a[0])); }, {{5, 4}}});
    cases.push_back({"ne_loss_true_class",
                     [=](const Args& a) { return ne_loss_true_class(softmax(a[0]), labels5); },
                     {{5, 4}}});
    cases.push_back({"recon_loss", [=](const Args& a) { return recon_loss(a[0], a[1]); },
                     {{4, 6}, {4, 6}}});
    cases.push_back({"mine_loss",
                     [=](const Args& a) {
                         std::mt19937 rng(11);
                         MiNetwork<double> m(3, rng);
                         return mine_loss(m, a[0], a[1], {4, 2, 0, 1, 3});
                     },
                     {{5, 3}, {5, 3}}});
    return cases;
}

inline std::vector<GradCheckResult> run_gradcheck_suite(unsigned seeds = 5, double tol = 1e-3) {
    std::vector<GradCheckResult> results;
    for (const auto& c : gradcheck_cases()) {
        GradCheckResult worst;
        worst.name = c.name;
        worst.tolerance = tol;
        worst.passed = true;
        for (unsigned s = 0; s < seeds; ++s) {
            GradCheckResult r = grad_check(c.name, c.fn, c.shapes, tol, 1234 + s);
            worst.max_rel_error = std::max(worst.max_rel_error, r.max_rel_error);
            worst.passed = worst.passed && r.passed;
        }
        results.push_back(worst);
    }
    return results;
}

} // namespace bpd
