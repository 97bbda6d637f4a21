#include <doctest.h>

#include <cmath>
#include <random>

#include "bpd/losses.hpp"
#include "bpd/tensor.hpp"

using namespace bpd;
using T = Tensor<double>;

TEST_CASE("one_hot places ones at 1-based label positions") {
    T t = one_hot<double>({2, 1, 3}, 3);
    CHECK(t.values() == std::vector<double>{0, 1, 0, 1, 0, 0, 0, 0, 1});
    CHECK_THROWS_AS(one_hot<double>({0}, 3), std::out_of_range);
    CHECK_THROWS_AS(one_hot<double>({4}, 3), std::out_of_range);
}

TEST_CASE("ce of uniform predictions is 2 ln K") {
    const std::size_t k = 12;
    T p = T::full({5, k}, 1.0 / static_cast<double>(k));
    T loss = ce_loss(p, p, {1, 5, 12, 3, 7});
    CHECK(loss.item() == doctest::Approx(2.0 * std::log(12.0)).epsilon(1e-9));
    CHECK(loss.item() == doctest::Approx(4.9698).epsilon(1e-4));
}

TEST_CASE("ce matches a hand-evaluated two-sample case") {
    // rows (0.9,0.1) and (0.2,0.8) on the first branch, uniform second
    // branch, labels 1 and 2
    T p_sig = T::from({0.9, 0.1, 0.2, 0.8}, {2, 2});
    T p_red = T::full({2, 2}, 0.5);
    T loss = ce_loss(p_sig, p_red, {1, 2});
    const double expected = -((std::log(0.9) + std::log(0.8)) / 2.0 + std::log(0.5));
    CHECK(loss.item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ce rejects shape mismatches") {
    T a = T::full({2, 3}, 1.0 / 3.0);
    T b = T::full({2, 4}, 0.25);
    CHECK_THROWS_AS(ce_loss(a, b, {1, 2}), ShapeError);
    CHECK_THROWS_AS(ce_loss(a, a, {1, 2, 3}), ShapeError);
}

TEST_CASE("ne is bounded by [-ln K, 0] and minimized by uniform rows") {
    const std::size_t k = 6;
    T uniform = T::full({3, k}, 1.0 / static_cast<double>(k));
    CHECK(ne_loss(uniform).item() == doctest::Approx(-std::log(6.0)).epsilon(1e-9));

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 25; ++trial) {
        T logits = T::zeros({4, k});
        for (auto& v : logits.values()) v = u(rng);
        const double ne = ne_loss(softmax(logits)).item();
        CHECK(ne >= -std::log(static_cast<double>(k)) - 1e-9);
        CHECK(ne <= 0.0);
        CHECK(ne >= ne_loss(uniform).item());
    }

    // near-deterministic rows sit near the upper bound
    T peaked = T::from({0.999, 0.001 / 5, 0.001 / 5, 0.001 / 5, 0.001 / 5, 0.001 / 5}, {1, 6});
    CHECK(ne_loss(peaked).item() > -0.01);
}

TEST_CASE("ne true-class variant is the adversarial cross-entropy") {
    T p = T::from({0.7, 0.3, 0.4, 0.6}, {2, 2});
    const double expected = -(std::log(0.7) + std::log(0.6)) / 2.0;
    CHECK(ne_loss_true_class(p, {1, 2}).item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("recon is the mean per-row euclidean distance") {
    T enc = T::from({3.0, 4.0, 0.0, 0.0}, {2, 2});
    T rec = T::from({0.0, 0.0, 5.0, 12.0}, {2, 2});
    // distances 5 and 13
    CHECK(recon_loss(enc, rec).item() == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(recon_loss(enc, enc).item() == doctest::Approx(0.0));
    CHECK_THROWS_AS(recon_loss(enc, T::zeros({3, 2})), ShapeError);
}

TEST_CASE("mine of a constant statistic network is exactly zero") {
    std::mt19937 rng(1);
    MiNetwork<double> m(2, rng);
    for (auto& v : m.fc1.weight.values()) v = 0.0;
    for (auto& v : m.fc1.bias.values()) v = 0.0;
    for (auto& v : m.fc2.weight.values()) v = 0.0;
    m.fc2.bias.values()[0] = 1.7;
    T a = T::from({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, {3, 2});
    T b = T::from({1.0, -1.0, 0.5, 0.7, -0.2, 0.3}, {3, 2});
    CHECK(mine_loss(m, a, b, {2, 0, 1}).item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mine equals an independent evaluation of the bound on 3 pairs") {
    std::mt19937 rng(21);
    MiNetwork<double> m(2, rng);
    T z_sig = T::from({0.4, -0.3, 1.2, 0.8, -0.9, 0.1}, {3, 2});
    T z_red = T::from({0.2, 0.5, -0.7, 1.1, 0.6, -0.4}, {3, 2});
    const std::vector<std::size_t> perm{1, 2, 0};

    auto score = [&](double s0, double s1, double r0, double r1) {
        return m.forward(T::from({s0, s1}, {1, 2}), T::from({r0, r1}, {1, 2})).item();
    };
    double joint = 0.0;
    for (int i = 0; i < 3; ++i)
        joint += score(z_sig.values()[2 * i], z_sig.values()[2 * i + 1], z_red.values()[2 * i],
                       z_red.values()[2 * i + 1]);
    joint /= 3.0;
    double sum_exp = 0.0;
    for (int i = 0; i < 3; ++i) {
        const std::size_t j = perm[static_cast<std::size_t>(i)];
        sum_exp += std::exp(score(z_sig.values()[2 * i], z_sig.values()[2 * i + 1],
                                  z_red.values()[2 * j], z_red.values()[2 * j + 1]));
    }
    const double expected = joint - std::log(sum_exp / 3.0);
    CHECK(mine_loss(m, z_sig, z_red, perm).item() == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("mine preconditions") {
    std::mt19937 rng(1);
    MiNetwork<double> m(2, rng);
    T one = T::zeros({1, 2});
    CHECK_THROWS_AS(mine_loss(m, one, one, {0}), std::invalid_argument);
    T three = T::zeros({3, 2});
    CHECK_THROWS_AS(mine_loss(m, three, three, {0, 1}), std::invalid_argument);
}

TEST_CASE("descending ne drives free logits toward uniform") {
    const std::size_t k = 4;
    T logits = T::from({2.0, -1.0, 0.5, 0.0}, {1, k});
    logits.set_requires_grad(true);
    for (int it = 0; it < 400; ++it) {
        logits.zero_grad();
        Tape<double> tape;
        T loss = ne_loss(softmax(logits));
        tape.backward(loss);
        for (std::size_t i = 0; i < k; ++i) logits.values()[i] -= 0.5 * logits.grad()[i];
    }
    T p = softmax(logits);
    for (double v : p.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-2));
}

TEST_CASE("shuffle_permutation is a seeded permutation of 0..n-1") {
    std::mt19937 a(5), b(5);
    auto pa = shuffle_permutation(10, a);
    auto pb = shuffle_permutation(10, b);
    CHECK(pa == pb);
    std::vector<std::size_t> sorted = pa;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(sorted[i] == i);
}
