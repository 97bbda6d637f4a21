#pragma once

// The four training objectives as differentiable scalar functions.
// All logarithms are natural; probabilities are clamped at 1e-12 before
// any log.

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "bpd/nets.hpp"
#include "bpd/tensor.hpp"

namespace bpd {

constexpr double kProbFloor = 1e-12;

template <class S>
Tensor<S> one_hot(const std::vector<int>& labels, std::size_t classes) {
    Tensor<S> t = Tensor<S>::zeros({labels.size(), classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 1 || static_cast<std::size_t>(labels[i]) > classes) {
            throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [1," +
                                    std::to_string(classes) + "]");
        }
        t.values()[i * classes + static_cast<std::size_t>(labels[i]) - 1] = S(1);
    }
    return t;
}

// Dual cross-entropy: both classifier branches supervised by the same
// activity labels.
template <class S>
Tensor<S> ce_loss(const Tensor<S>& p_sig, const Tensor<S>& p_red, const std::vector<int>& labels) {
    if (p_sig.rank() != 2 || p_sig.shape() != p_red.shape() || p_sig.dim(0) != labels.size()) {
        throw ShapeError("ce_loss: p_sig " + shape_str(p_sig.shape()) + ", p_red " +
                         shape_str(p_red.shape()) + ", " + std::to_string(labels.size()) +
                         " labels");
    }
    Tensor<S> onehot = one_hot<S>(labels, p_sig.dim(1));
    Tensor<S> term_sig = mean(sum_last(mul(onehot, log_t(clamp_min(p_sig, S(kProbFloor))))));
    Tensor<S> term_red = mean(sum_last(mul(onehot, log_t(clamp_min(p_red, S(kProbFloor))))));
    return neg(add(term_sig, term_red));
}

// Mean negative Shannon entropy of the adversarial classifier's output
// rows; minimizing drives the rows toward uniform.
template <class S>
Tensor<S> ne_loss(const Tensor<S>& p_red) {
    if (p_red.rank() != 2) throw ShapeError("ne_loss: expected rank 2, got " + shape_str(p_red.shape()));
    return mean(sum_last(mul(p_red, log_t(clamp_min(p_red, S(kProbFloor))))));
}

// Literal reading of the printed objective: negative log-probability of the
// true class under the adversarial classifier.
template <class S>
Tensor<S> ne_loss_true_class(const Tensor<S>& p_red, const std::vector<int>& labels) {
    if (p_red.rank() != 2 || p_red.dim(0) != labels.size()) {
        throw ShapeError("ne_loss_true_class: p_red " + shape_str(p_red.shape()) + ", " +
                         std::to_string(labels.size()) + " labels");
    }
    Tensor<S> onehot = one_hot<S>(labels, p_red.dim(1));
    return neg(mean(sum_last(mul(onehot, log_t(clamp_min(p_red, S(kProbFloor)))))));
}

// Mean per-sample Euclidean distance between the encoder representation and
// its reconstruction.
template <class S>
Tensor<S> recon_loss(const Tensor<S>& enc, const Tensor<S>& recon) {
    if (enc.rank() != 2 || enc.shape() != recon.shape()) {
        throw ShapeError("recon_loss: enc " + shape_str(enc.shape()) + ", recon " +
                         shape_str(recon.shape()));
    }
    return mean(sqrt_t(sum_last(square(sub(enc, recon)))));
}

// Donsker-Varadhan lower-bound statistic: mean joint score minus the log of
// the mean exponentiated marginal score. The marginal pairs use z_red rows
// shuffled by the supplied permutation; the log-sum-exp is max-subtracted.
template <class S>
Tensor<S> mine_loss(const MiNetwork<S>& mi_net, const Tensor<S>& z_sig, const Tensor<S>& z_red,
                    const std::vector<std::size_t>& permutation) {
    const std::size_t n = z_sig.dim(0);
    if (n < 2) throw std::invalid_argument("mine_loss: need at least 2 samples");
    if (permutation.size() != n) {
        throw std::invalid_argument("mine_loss: permutation size " +
                                    std::to_string(permutation.size()) + " for batch " +
                                    std::to_string(n));
    }
    Tensor<S> joint = mi_net.forward(z_sig, z_red);
    Tensor<S> marginal = mi_net.forward(z_sig, permute_rows(z_red, permutation));

    const S mx = *std::max_element(marginal.values().begin(), marginal.values().end());
    Tensor<S> lse = add_scalar(log_t(mean(exp_t(add_scalar(marginal, -mx)))), mx);
    return sub(mean(joint), lse);
}

inline std::vector<std::size_t> shuffle_permutation(std::size_t n, std::mt19937& rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

} // namespace bpd
