#pragma once

// Parameterized layers assembled from the tensor primitives.

#include <random>
#include <vector>

#include "bpd/tensor.hpp"

namespace bpd {

// Xavier Normal: weights ~ N(0, 2/(fan_in+fan_out)), deterministic per seed.
template <class S>
Tensor<S> xavier_normal(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937& rng) {
    if (fan_in == 0 || fan_out == 0) {
        throw std::invalid_argument("xavier_normal: zero fan dimension");
    }
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor<S> t = Tensor<S>::zeros(std::move(shape));
    for (auto& v : t.values()) v = static_cast<S>(dist(rng));
    t.set_requires_grad(true);
    return t;
}

template <class S>
struct Linear {
    Tensor<S> weight; // (in, out)
    Tensor<S> bias;   // (out)

    Linear() = default;
    Linear(std::size_t in, std::size_t out, std::mt19937& rng)
        : weight(xavier_normal<S>({in, out}, in, out, rng)),
          bias(Tensor<S>::zeros({out})) {
        bias.set_requires_grad(true);
    }

    Tensor<S> forward(const Tensor<S>& x) const { return add(matmul(x, weight), bias); }

    std::vector<Tensor<S>*> params() { return {&weight, &bias}; }
};

// Batch normalization over the batch axis of a (n, d) tensor. Training mode
// normalizes with batch statistics (built from primitives, so gradients flow
// through mean and variance); evaluation mode uses the running statistics
// and is deterministic.
template <class S>
struct BatchNorm1d {
    Tensor<S> gamma;
    Tensor<S> beta;
    std::vector<S> running_mean;
    std::vector<S> running_var;
    S momentum = S(0.1);
    S eps = S(1e-5);

    BatchNorm1d() = default;
    explicit BatchNorm1d(std::size_t d)
        : gamma(Tensor<S>::full({d}, S(1))),
          beta(Tensor<S>::zeros({d})),
          running_mean(d, S(0)),
          running_var(d, S(1)) {
        gamma.set_requires_grad(true);
        beta.set_requires_grad(true);
    }

    Tensor<S> forward(const Tensor<S>& x, bool train) {
        if (x.rank() != 2 || x.dim(1) != gamma.dim(0)) {
            throw ShapeError("batchnorm: input " + shape_str(x.shape()) + ", features " +
                             std::to_string(gamma.dim(0)));
        }
        if (train) {
            Tensor<S> mu = mean_axis0(x);
            Tensor<S> centered = sub(x, mu);
            Tensor<S> var = mean_axis0(square(centered));
            const std::size_t d = gamma.dim(0);
            for (std::size_t j = 0; j < d; ++j) {
                running_mean[j] = (S(1) - momentum) * running_mean[j] + momentum * mu.values()[j];
                running_var[j] = (S(1) - momentum) * running_var[j] + momentum * var.values()[j];
            }
            Tensor<S> denom = sqrt_t(add_scalar(var, eps));
            return add(mul(div(centered, denom), gamma), beta);
        }
        Tensor<S> mu = Tensor<S>::from(running_mean, {running_mean.size()});
        Tensor<S> denom = Tensor<S>::zeros({running_var.size()});
        for (std::size_t j = 0; j < running_var.size(); ++j)
            denom.values()[j] = std::sqrt(running_var[j] + eps);
        return add(mul(div(sub(x, mu), denom), gamma), beta);
    }

    std::vector<Tensor<S>*> params() { return {&gamma, &beta}; }
};

template <class S>
struct Conv1dLayer {
    Tensor<S> weight; // (out_ch, in_ch, k)
    Tensor<S> bias;   // (out_ch)

    Conv1dLayer() = default;
    Conv1dLayer(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::mt19937& rng)
        : weight(xavier_normal<S>({out_ch, in_ch, kernel}, in_ch * kernel, out_ch * kernel, rng)),
          bias(Tensor<S>::zeros({out_ch})) {
        bias.set_requires_grad(true);
    }

    Tensor<S> forward(const Tensor<S>& x) const { return conv1d(x, weight, bias); }

    std::vector<Tensor<S>*> params() { return {&weight, &bias}; }
};

// One LSTM step. Gates use separate weight matrices per gate; state is the
// (h, c) pair. Exposed as a free composite so the gradient checker can probe
// it like any other primitive.
template <class S>
struct LstmCellParams {
    Linear<S> input_gate, forget_gate, cell_gate, output_gate;   // from x_t
    Linear<S> input_rec, forget_rec, cell_rec, output_rec;       // from h_{t-1}

    LstmCellParams() = default;
    LstmCellParams(std::size_t in, std::size_t hidden, std::mt19937& rng)
        : input_gate(in, hidden, rng), forget_gate(in, hidden, rng),
          cell_gate(in, hidden, rng), output_gate(in, hidden, rng),
          input_rec(hidden, hidden, rng), forget_rec(hidden, hidden, rng),
          cell_rec(hidden, hidden, rng), output_rec(hidden, hidden, rng) {}

    std::vector<Tensor<S>*> params() {
        std::vector<Tensor<S>*> out;
        for (Linear<S>* l : {&input_gate, &forget_gate, &cell_gate, &output_gate,
                             &input_rec, &forget_rec, &cell_rec, &output_rec})
            for (auto* p : l->params()) out.push_back(p);
        return out;
    }
};

template <class S>
struct LstmState {
    Tensor<S> h;
    Tensor<S> c;
};

template <class S>
LstmState<S> lstm_cell(const LstmCellParams<S>& p, const Tensor<S>& x_t, const LstmState<S>& prev) {
    Tensor<S> i = sigmoid(add(p.input_gate.forward(x_t), p.input_rec.forward(prev.h)));
    Tensor<S> f = sigmoid(add(p.forget_gate.forward(x_t), p.forget_rec.forward(prev.h)));
    Tensor<S> g = tanh_t(add(p.cell_gate.forward(x_t), p.cell_rec.forward(prev.h)));
    Tensor<S> o = sigmoid(add(p.output_gate.forward(x_t), p.output_rec.forward(prev.h)));
    Tensor<S> c = add(mul(f, prev.c), mul(i, g));
    Tensor<S> h = mul(o, tanh_t(c));
    return {h, c};
}

// Stacked LSTM over a (n, channels, time) input; returns the final hidden
// state of the last layer.
template <class S>
struct Lstm {
    std::vector<LstmCellParams<S>> cells;
    std::size_t hidden = 0;

    Lstm() = default;
    Lstm(std::size_t in, std::size_t hidden_units, std::size_t layers, std::mt19937& rng)
        : hidden(hidden_units) {
        std::size_t d = in;
        for (std::size_t l = 0; l < layers; ++l) {
            cells.emplace_back(d, hidden_units, rng);
            d = hidden_units;
        }
    }

    Tensor<S> forward(const Tensor<S>& x) const {
        const std::size_t n = x.dim(0), T = x.dim(2);
        std::vector<Tensor<S>> seq;
        seq.reserve(T);
        for (std::size_t t = 0; t < T; ++t) seq.push_back(select_time(x, t));
        for (const auto& cell : cells) {
            LstmState<S> state{Tensor<S>::zeros({n, hidden}), Tensor<S>::zeros({n, hidden})};
            for (auto& x_t : seq) {
                state = lstm_cell(cell, x_t, state);
                x_t = state.h;
            }
        }
        return seq.back();
    }

    std::vector<Tensor<S>*> params() {
        std::vector<Tensor<S>*> out;
        for (auto& c : cells)
            for (auto* p : c.params()) out.push_back(p);
        return out;
    }
};

template <class S>
std::size_t param_count(const std::vector<Tensor<S>*>& params) {
    std::size_t n = 0;
    for (const auto* p : params) n += p->size();
    return n;
}

} // namespace bpd
