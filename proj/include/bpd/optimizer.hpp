#pragma once

// Adam with bias correction, one state per parameter group.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "bpd/tensor.hpp"

namespace bpd {

template <class S>
class Adam {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    Adam() = default;
    Adam(std::vector<Tensor<S>*> params, double lr) : params_(std::move(params)), lr_(lr) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto* p : params_) {
            m_.emplace_back(p->size(), S(0));
            v_.emplace_back(p->size(), S(0));
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    void step() {
        ++step_count_;
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count_));
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            Tensor<S>* p = params_[pi];
            if (!p->requires_grad()) {
                throw std::logic_error("adam: parameter has no gradient storage");
            }
            const auto& g = p->grad();
            auto& m = m_[pi];
            auto& v = v_[pi];
            auto& w = p->values();
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                m[i] = static_cast<S>(kBeta1 * m[i] + (1.0 - kBeta1) * gi);
                v[i] = static_cast<S>(kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi);
                const double mhat = static_cast<double>(m[i]) / bc1;
                const double vhat = static_cast<double>(v[i]) / bc2;
                w[i] = static_cast<S>(w[i] - lr_ * mhat / (std::sqrt(vhat) + kEps));
            }
        }
    }

    // Gradient ascent variant used by the minimax dependency-reduction mode.
    void step_ascend() {
        for (auto* p : params_)
            for (auto& g : p->grad()) g = -g;
        step();
        for (auto* p : params_)
            for (auto& g : p->grad()) g = -g;
    }

    long step_count() const { return step_count_; }
    const std::vector<Tensor<S>*>& params() const { return params_; }

    std::vector<std::vector<S>>& first_moments() { return m_; }
    std::vector<std::vector<S>>& second_moments() { return v_; }
    long& step_count_ref() { return step_count_; }

private:
    std::vector<Tensor<S>*> params_;
    double lr_ = 0.0;
    std::vector<std::vector<S>> m_;
    std::vector<std::vector<S>> v_;
    long step_count_ = 0;
};

} // namespace bpd
