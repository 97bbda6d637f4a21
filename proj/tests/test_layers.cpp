#include <doctest.h>

#include <cmath>
#include <random>

#include "bpd/layers.hpp"
#include "bpd/nets.hpp"

using namespace bpd;
using T = Tensor<double>;

TEST_CASE("xavier normal std formula") {
    // fan_in = fan_out = 100 gives std sqrt(2/200) = 0.1
    std::mt19937 rng(42);
    T w = xavier_normal<double>({100, 100}, 100, 100, rng);
    double mean = 0.0;
    for (double v : w.values()) mean += v;
    mean /= static_cast<double>(w.size());
    double var = 0.0;
    for (double v : w.values()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(w.size());
    CHECK(std::sqrt(var) == doctest::Approx(0.1).epsilon(0.05));
    CHECK(mean == doctest::Approx(0.0).epsilon(1.0)); // |mean| << std
    CHECK(std::abs(mean) < 0.005);
}

TEST_CASE("xavier normal is deterministic per seed") {
    std::mt19937 a(7), b(7), c(8);
    T wa = xavier_normal<double>({4, 5}, 4, 5, a);
    T wb = xavier_normal<double>({4, 5}, 4, 5, b);
    T wc = xavier_normal<double>({4, 5}, 4, 5, c);
    CHECK(wa.values() == wb.values());
    CHECK(wa.values() != wc.values());
}

TEST_CASE("xavier normal rejects zero fans") {
    std::mt19937 rng(1);
    CHECK_THROWS_AS(xavier_normal<double>({1, 1}, 0, 1, rng), std::invalid_argument);
}

TEST_CASE("linear layer maps shapes and starts with zero bias") {
    std::mt19937 rng(3);
    Linear<double> lin(6, 4, rng);
    CHECK(lin.weight.shape() == Shape{6, 4});
    CHECK(lin.bias.shape() == Shape{4});
    for (double b : lin.bias.values()) CHECK(b == 0.0);
    T x = T::zeros({5, 6});
    CHECK(lin.forward(x).shape() == Shape{5, 4});
    CHECK(param_count(lin.params()) == 6 * 4 + 4);
}

TEST_CASE("batchnorm train output has zero mean and unit variance per feature") {
    std::mt19937 rng(11);
    std::normal_distribution<double> g(3.0, 2.5);
    BatchNorm1d<double> bn(3);
    T x = T::zeros({64, 3});
    for (auto& v : x.values()) v = g(rng);
    T y = bn.forward(x, true);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < 64; ++i) mean += y.values()[i * 3 + j];
        mean /= 64.0;
        for (std::size_t i = 0; i < 64; ++i) {
            const double d = y.values()[i * 3 + j] - mean;
            var += d * d;
        }
        var /= 64.0;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("batchnorm eval mode is deterministic and uses running stats") {
    std::mt19937 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    BatchNorm1d<double> bn(2);
    T x = T::zeros({32, 2});
    for (auto& v : x.values()) v = g(rng);
    for (int i = 0; i < 200; ++i) bn.forward(x, true);

    T probe = T::from({0.3, -0.7, 1.1, 0.0}, {2, 2});
    T y1 = bn.forward(probe, false);
    T y2 = bn.forward(probe, false);
    CHECK(y1.values() == y2.values());
    // repeated exposure to one batch drives the running stats to that
    // batch's statistics
    for (std::size_t j = 0; j < 2; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 32; ++i) mean += x.values()[i * 2 + j];
        mean /= 32.0;
        CHECK(bn.running_mean[j] == doctest::Approx(mean).epsilon(1e-3));
    }
}

TEST_CASE("batchnorm rejects feature mismatch") {
    BatchNorm1d<double> bn(3);
    CHECK_THROWS_AS(bn.forward(T::zeros({4, 5}), true), ShapeError);
}

TEST_CASE("cnn encoder output dimension equals latent_dim") {
    std::mt19937 rng(5);
    CnnEncoder<double> enc(3, 48, 16, rng);
    T x = T::zeros({2, 3, 48});
    T z = enc.forward(x, false);
    CHECK(z.shape() == Shape{2, 16});
}

TEST_CASE("cnn encoder rejects too-short windows") {
    std::mt19937 rng(5);
    CHECK_THROWS_AS(CnnEncoder<double>(3, 8, 16, rng), ShapeError);
}

TEST_CASE("convlstm encoder output dimension equals latent_dim") {
    std::mt19937 rng(5);
    ConvLstmEncoder<double> enc(3, 24, 8, rng);
    T x = T::zeros({2, 3, 24});
    T z = enc.forward(x, false);
    CHECK(z.shape() == Shape{2, 8});
}

TEST_CASE("encoder eval mode is a pure function of the input") {
    std::mt19937 rng(9);
    EncoderSpec spec{EncoderKind::cnn, 2, 48, 12};
    Encoder<double> enc(spec, rng);
    std::mt19937 data_rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    T x = T::zeros({3, 2, 48});
    for (auto& v : x.values()) v = u(data_rng);
    T a = enc.forward(x, false);
    T b = enc.forward(x, false);
    CHECK(a.values() == b.values());
}

TEST_CASE("classifier rows are probability distributions") {
    std::mt19937 rng(2);
    Classifier<double> cls(10, 5, 0.5, rng);
    std::mt19937 drop_rng(1);
    T x = T::zeros({4, 10});
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (auto& v : x.values()) v = u(rng);
    T p = cls.forward(x, true, drop_rng);
    CHECK(p.shape() == Shape{4, 5});
    for (std::size_t i = 0; i < 4; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 5; ++j) s += p.values()[i * 5 + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("classifier eval mode ignores dropout randomness") {
    std::mt19937 rng(2);
    Classifier<double> cls(6, 3, 0.9, rng);
    T x = T::full({2, 6}, 0.4);
    std::mt19937 r1(1), r2(999);
    T a = cls.forward(x, false, r1);
    T b = cls.forward(x, false, r2);
    CHECK(a.values() == b.values());
}

TEST_CASE("lstm final hidden state has the configured width") {
    std::mt19937 rng(6);
    Lstm<double> lstm(3, 7, 2, rng);
    T x = T::zeros({4, 3, 5});
    CHECK(lstm.forward(x).shape() == Shape{4, 7});
    // two layers, eight Linears each, (in x hidden | hidden x hidden) + bias
    const std::size_t layer1 = 4 * (3 * 7 + 7) + 4 * (7 * 7 + 7);
    const std::size_t layer2 = 4 * (7 * 7 + 7) + 4 * (7 * 7 + 7);
    CHECK(param_count(lstm.params()) == layer1 + layer2);
}

TEST_CASE("reconstructor consumes the concatenated pair") {
    std::mt19937 rng(8);
    Reconstructor<double> rec(5, rng);
    T a = T::zeros({3, 5});
    T b = T::zeros({3, 5});
    CHECK(rec.forward(a, b).shape() == Shape{3, 5});
}

TEST_CASE("mi network emits one score per pair") {
    std::mt19937 rng(8);
    MiNetwork<double> m(5, rng);
    T a = T::zeros({3, 5});
    T b = T::zeros({3, 5});
    CHECK(m.forward(a, b).shape() == Shape{3, 1});
}
