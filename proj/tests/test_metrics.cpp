#include <doctest.h>

#include <cmath>
#include <random>

#include "bpd/metrics.hpp"

using namespace bpd;

namespace {

// independent precision/recall computation used as the oracle
std::vector<double> brute_force_f1(const ConfusionMatrix& cm) {
    std::vector<double> out(cm.classes);
    for (std::size_t k = 0; k < cm.classes; ++k) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t j = 0; j < cm.classes; ++j) {
            if (j == k) {
                tp = static_cast<double>(cm.at(k, k));
            } else {
                fn += static_cast<double>(cm.at(k, j));
                fp += static_cast<double>(cm.at(j, k));
            }
        }
        if (tp + fp + fn == 0) {
            out[k] = std::nan("");
        } else if (tp == 0) {
            out[k] = 0.0;
        } else {
            const double precision = tp / (tp + fp);
            const double recall = tp / (tp + fn);
            out[k] = 2.0 * precision * recall / (precision + recall);
        }
    }
    return out;
}

} // namespace

TEST_CASE("perfect predictions give f1 of 1 for every class") {
    ConfusionMatrix cm(3);
    cm.add(1, 1, 10);
    cm.add(2, 2, 4);
    cm.add(3, 3, 7);
    for (double v : classwise_f1(cm)) CHECK(v == doctest::Approx(1.0));
    CHECK(macro_f1(cm) == doctest::Approx(1.0));
    CHECK(weighted_f1(cm) == doctest::Approx(1.0));
}

TEST_CASE("symmetric two-class confusion gives 0.5") {
    ConfusionMatrix cm(2);
    cm.add(1, 1, 5);
    cm.add(1, 2, 5);
    cm.add(2, 1, 5);
    cm.add(2, 2, 5);
    CHECK(macro_f1(cm) == doctest::Approx(0.5));
}

TEST_CASE("zero diagonal scores zero") {
    ConfusionMatrix cm(2);
    cm.add(1, 2, 3);
    cm.add(2, 1, 3);
    auto f1 = classwise_f1(cm);
    CHECK(f1[0] == 0.0);
    CHECK(f1[1] == 0.0);
    CHECK(macro_f1(cm) == 0.0);
}

TEST_CASE("absent classes are excluded from the macro mean") {
    ConfusionMatrix cm(3);
    cm.add(1, 1, 8);
    cm.add(2, 2, 8);
    // class 3 never appears as truth or prediction
    auto f1 = classwise_f1(cm);
    CHECK(std::isnan(f1[2]));
    CHECK(macro_f1(cm) == doctest::Approx(1.0));
}

TEST_CASE("labels outside the class range are rejected") {
    ConfusionMatrix cm(3);
    CHECK_THROWS_AS(cm.add(0, 1), std::out_of_range);
    CHECK_THROWS_AS(cm.add(1, 4), std::out_of_range);
    ConfusionMatrix empty(3);
    CHECK_THROWS_AS(classwise_f1(empty), std::invalid_argument);
}

TEST_CASE("random confusion matrices match the brute-force oracle") {
    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> kdist(2, 7);
    std::uniform_int_distribution<std::int64_t> cdist(0, 20);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = static_cast<std::size_t>(kdist(rng));
        ConfusionMatrix cm(k);
        std::int64_t total = 0;
        for (auto& c : cm.counts) {
            c = cdist(rng);
            total += c;
        }
        if (total == 0) cm.counts[0] = 1;

        const auto got = classwise_f1(cm);
        const auto want = brute_force_f1(cm);
        REQUIRE(got.size() == want.size());
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (std::isnan(want[i])) {
                CHECK(std::isnan(got[i]));
            } else {
                CHECK(got[i] == want[i]);
                acc += want[i];
                ++n;
            }
        }
        CHECK(macro_f1(cm) == acc / static_cast<double>(n));
    }
}

TEST_CASE("macro f1 is invariant under class permutation") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<std::int64_t> cdist(0, 9);
    ConfusionMatrix cm(4);
    for (auto& c : cm.counts) c = cdist(rng);
    cm.counts[0] += 1;
    std::vector<std::size_t> perm{2, 0, 3, 1};
    ConfusionMatrix permuted(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            permuted.counts[perm[i] * 4 + perm[j]] = cm.at(i, j);
    CHECK(macro_f1(cm) == doctest::Approx(macro_f1(permuted)).epsilon(1e-12));
}

TEST_CASE("matrix accumulation is additive") {
    ConfusionMatrix a(2), b(2);
    a.add(1, 1, 2);
    a.add(2, 1, 1);
    b.add(1, 2, 4);
    b.add(2, 2, 3);
    ConfusionMatrix sum = a;
    sum += b;
    CHECK(sum.at(0, 0) == 2);
    CHECK(sum.at(0, 1) == 4);
    CHECK(sum.at(1, 0) == 1);
    CHECK(sum.at(1, 1) == 3);
    CHECK(sum.total() == 10);
    ConfusionMatrix other(3);
    CHECK_THROWS_AS(sum += other, std::invalid_argument);
}
