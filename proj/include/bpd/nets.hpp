#pragma once

// The two encoder architectures and the four head kinds used by the
// disentanglement model.

#include <random>
#include <string>
#include <vector>

#include "bpd/layers.hpp"
#include "bpd/tensor.hpp"

namespace bpd {

enum class EncoderKind { cnn, convlstm };

inline EncoderKind encoder_kind_from_string(const std::string& s) {
    if (s == "cnn") return EncoderKind::cnn;
    if (s == "convlstm") return EncoderKind::convlstm;
    throw std::invalid_argument("unknown encoder kind: " + s);
}

inline std::size_t default_latent_dim(EncoderKind kind) {
    return kind == EncoderKind::cnn ? 592 : 32;
}

struct EncoderSpec {
    EncoderKind kind = EncoderKind::cnn;
    std::size_t input_channels = 0;
    std::size_t window_length = 0;
    std::size_t latent_dim = 0;
};

// Three conv blocks (64 filters, kernel 5, ReLU, max-pool 2), flatten, one
// fully-connected layer to the latent dimension.
template <class S>
struct CnnEncoder {
    static constexpr std::size_t kFilters = 64;
    static constexpr std::size_t kKernel = 5;

    Conv1dLayer<S> conv1, conv2, conv3;
    Linear<S> fc;
    std::size_t window_length = 0;
    std::size_t flat_dim = 0;
    mutable std::size_t forward_calls = 0;

    CnnEncoder() = default;
    CnnEncoder(std::size_t channels, std::size_t window, std::size_t latent, std::mt19937& rng)
        : conv1(channels, kFilters, kKernel, rng),
          conv2(kFilters, kFilters, kKernel, rng),
          conv3(kFilters, kFilters, kKernel, rng),
          window_length(window) {
        std::size_t t = window;
        for (int block = 0; block < 3; ++block) {
            if (t < kKernel) {
                throw ShapeError("cnn encoder: window " + std::to_string(window) +
                                 " too short for three conv blocks");
            }
            t = (t - kKernel + 1) / 2;
            if (t == 0) {
                throw ShapeError("cnn encoder: window " + std::to_string(window) +
                                 " too short for three conv blocks");
            }
        }
        flat_dim = kFilters * t;
        fc = Linear<S>(flat_dim, latent, rng);
    }

    Tensor<S> forward(const Tensor<S>& x, bool /*train*/) const {
        ++forward_calls;
        if (x.rank() != 3 || x.dim(2) != window_length) {
            throw ShapeError("cnn encoder: input " + shape_str(x.shape()) + ", expected time " +
                             std::to_string(window_length));
        }
        Tensor<S> h = maxpool1d(relu(conv1.forward(x)), 2);
        h = maxpool1d(relu(conv2.forward(h)), 2);
        h = maxpool1d(relu(conv3.forward(h)), 2);
        h = reshape(h, {x.dim(0), flat_dim});
        return fc.forward(h);
    }

    std::vector<Tensor<S>*> params() {
        std::vector<Tensor<S>*> out;
        for (auto* l : {&conv1, &conv2, &conv3})
            for (auto* p : l->params()) out.push_back(p);
        for (auto* p : fc.params()) out.push_back(p);
        return out;
    }
};

// Four conv layers (64 filters, kernel 5, ReLU) feeding two LSTM layers of
// 128 hidden units; the final hidden state is projected to the latent dim.
template <class S>
struct ConvLstmEncoder {
    static constexpr std::size_t kFilters = 64;
    static constexpr std::size_t kKernel = 5;
    static constexpr std::size_t kHidden = 128;

    Conv1dLayer<S> conv1, conv2, conv3, conv4;
    Lstm<S> lstm;
    Linear<S> fc;
    std::size_t window_length = 0;
    mutable std::size_t forward_calls = 0;

    ConvLstmEncoder() = default;
    ConvLstmEncoder(std::size_t channels, std::size_t window, std::size_t latent, std::mt19937& rng)
        : conv1(channels, kFilters, kKernel, rng),
          conv2(kFilters, kFilters, kKernel, rng),
          conv3(kFilters, kFilters, kKernel, rng),
          conv4(kFilters, kFilters, kKernel, rng),
          lstm(kFilters, kHidden, 2, rng),
          fc(kHidden, latent, rng),
          window_length(window) {
        if (window < 4 * (kKernel - 1) + 1) {
            throw ShapeError("convlstm encoder: window " + std::to_string(window) + " too short");
        }
    }

    Tensor<S> forward(const Tensor<S>& x, bool /*train*/) const {
        ++forward_calls;
        if (x.rank() != 3 || x.dim(2) != window_length) {
            throw ShapeError("convlstm encoder: input " + shape_str(x.shape()) +
                             ", expected time " + std::to_string(window_length));
        }
        Tensor<S> h = relu(conv1.forward(x));
        h = relu(conv2.forward(h));
        h = relu(conv3.forward(h));
        h = relu(conv4.forward(h));
        return fc.forward(lstm.forward(h));
    }

    std::vector<Tensor<S>*> params() {
        std::vector<Tensor<S>*> out;
        for (auto* l : {&conv1, &conv2, &conv3, &conv4})
            for (auto* p : l->params()) out.push_back(p);
        for (auto* p : lstm.params()) out.push_back(p);
        for (auto* p : fc.params()) out.push_back(p);
        return out;
    }
};

template <class S>
struct Encoder {
    EncoderSpec spec;
    CnnEncoder<S> cnn;
    ConvLstmEncoder<S> convlstm;
    mutable std::size_t forward_calls = 0;

    Encoder() = default;
    Encoder(EncoderSpec s, std::mt19937& rng) : spec(s) {
        if (spec.kind == EncoderKind::cnn)
            cnn = CnnEncoder<S>(spec.input_channels, spec.window_length, spec.latent_dim, rng);
        else
            convlstm = ConvLstmEncoder<S>(spec.input_channels, spec.window_length, spec.latent_dim, rng);
    }

    Tensor<S> forward(const Tensor<S>& x, bool train) const {
        ++forward_calls;
        return spec.kind == EncoderKind::cnn ? cnn.forward(x, train) : convlstm.forward(x, train);
    }

    std::vector<Tensor<S>*> params() {
        return spec.kind == EncoderKind::cnn ? cnn.params() : convlstm.params();
    }
};

// Single fully-connected layer followed by batch normalization; no
// activation, so the disentangled features are unbounded reals.
template <class S>
struct Disentangler {
    Linear<S> fc;
    BatchNorm1d<S> bn;
    mutable std::size_t forward_calls = 0;

    Disentangler() = default;
    Disentangler(std::size_t latent, std::mt19937& rng) : fc(latent, latent, rng), bn(latent) {}

    Tensor<S> forward(const Tensor<S>& x, bool train) {
        ++forward_calls;
        return bn.forward(fc.forward(x), train);
    }

    std::vector<Tensor<S>*> params() {
        std::vector<Tensor<S>*> out = fc.params();
        for (auto* p : bn.params()) out.push_back(p);
        return out;
    }
};

// Two fully-connected layers with dropout; softmax output over K classes.
template <class S>
struct Classifier {
    static constexpr std::size_t kHidden = 128;

    Linear<S> fc1, fc2;
    double dropout_rate = 0.5;
    mutable std::size_t forward_calls = 0;

    Classifier() = default;
    Classifier(std::size_t latent, std::size_t classes, double rate, std::mt19937& rng)
        : fc1(latent, kHidden, rng), fc2(kHidden, classes, rng), dropout_rate(rate) {}

    Tensor<S> forward(const Tensor<S>& x, bool train, std::mt19937& rng) const {
        ++forward_calls;
        Tensor<S> h = relu(fc1.forward(x));
        if (train && dropout_rate > 0.0) h = dropout(h, dropout_rate, rng);
        return softmax(fc2.forward(h));
    }

    std::vector<Tensor<S>*> params() {
        std::vector<Tensor<S>*> out = fc1.params();
        for (auto* p : fc2.params()) out.push_back(p);
        return out;
    }
};

// Single fully-connected layer mapping the concatenated (z_sig, z_red) pair
// back to the encoder representation.
template <class S>
struct Reconstructor {
    Linear<S> fc;
    mutable std::size_t forward_calls = 0;

    Reconstructor() = default;
    Reconstructor(std::size_t latent, std::mt19937& rng) : fc(2 * latent, latent, rng) {}

    Tensor<S> forward(const Tensor<S>& z_sig, const Tensor<S>& z_red) const {
        ++forward_calls;
        return fc.forward(concat(z_sig, z_red));
    }

    std::vector<Tensor<S>*> params() { return fc.params(); }
};

// Two fully-connected layers producing one scalar per (z_sig, z_red) pair.
template <class S>
struct MiNetwork {
    static constexpr std::size_t kHidden = 128;

    Linear<S> fc1, fc2;
    mutable std::size_t forward_calls = 0;

    MiNetwork() = default;
    MiNetwork(std::size_t latent, std::mt19937& rng)
        : fc1(2 * latent, kHidden, rng), fc2(kHidden, 1, rng) {}

    Tensor<S> forward(const Tensor<S>& z_sig, const Tensor<S>& z_red) const {
        ++forward_calls;
        return fc2.forward(relu(fc1.forward(concat(z_sig, z_red))));
    }

    std::vector<Tensor<S>*> params() {
        std::vector<Tensor<S>*> out = fc1.params();
        for (auto* p : fc2.params()) out.push_back(p);
        return out;
    }
};

} // namespace bpd
