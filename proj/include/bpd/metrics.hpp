#pragma once

// Confusion-matrix based F1 scoring. "Mean F1" is the macro average:
// unweighted over classes, with zero-support-and-zero-prediction classes
// excluded from the mean.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bpd {

struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::int64_t> counts; // rows = true class, columns = predicted

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t k) : classes(k), counts(k * k, 0) {}

    void add(int true_label, int predicted_label, std::int64_t n = 1) {
        if (true_label < 1 || predicted_label < 1 ||
            static_cast<std::size_t>(true_label) > classes ||
            static_cast<std::size_t>(predicted_label) > classes) {
            throw std::out_of_range("confusion matrix: labels must lie in [1," +
                                    std::to_string(classes) + "]");
        }
        counts[(static_cast<std::size_t>(true_label) - 1) * classes +
               static_cast<std::size_t>(predicted_label) - 1] += n;
    }

    std::int64_t at(std::size_t true_idx, std::size_t pred_idx) const {
        return counts[true_idx * classes + pred_idx];
    }

    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
        if (other.classes != classes) throw std::invalid_argument("confusion matrix: size mismatch");
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
        return *this;
    }
};

// Per-class F1. A class with zero true and zero predicted instances gets
// NaN (not applicable); a class with instances but a zero precision or
// recall denominator contributes 0.
inline std::vector<double> classwise_f1(const ConfusionMatrix& cm) {
    if (cm.classes == 0 || cm.total() == 0) {
        throw std::invalid_argument("classwise_f1: empty confusion matrix");
    }
    std::vector<double> f1(cm.classes, 0.0);
    for (std::size_t k = 0; k < cm.classes; ++k) {
        std::int64_t tp = cm.at(k, k), row = 0, col = 0;
        for (std::size_t j = 0; j < cm.classes; ++j) {
            row += cm.at(k, j);
            col += cm.at(j, k);
        }
        if (row == 0 && col == 0) {
            f1[k] = std::nan("");
        } else if (tp == 0) {
            f1[k] = 0.0;
        } else {
            const double p = static_cast<double>(tp) / static_cast<double>(col);
            const double r = static_cast<double>(tp) / static_cast<double>(row);
            f1[k] = 2.0 * p * r / (p + r);
        }
    }
    return f1;
}

inline double macro_f1(const ConfusionMatrix& cm) {
    const auto f1 = classwise_f1(cm);
    double acc = 0.0;
    std::size_t n = 0;
    for (double v : f1) {
        if (!std::isnan(v)) {
            acc += v;
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("macro_f1: no class has instances");
    return acc / static_cast<double>(n);
}

// Support-weighted variant, available for sensitivity checks.
inline double weighted_f1(const ConfusionMatrix& cm) {
    const auto f1 = classwise_f1(cm);
    double acc = 0.0;
    std::int64_t total = 0;
    for (std::size_t k = 0; k < cm.classes; ++k) {
        std::int64_t row = 0;
        for (std::size_t j = 0; j < cm.classes; ++j) row += cm.at(k, j);
        if (row == 0) continue;
        acc += f1[k] * static_cast<double>(row);
        total += row;
    }
    if (total == 0) throw std::invalid_argument("weighted_f1: no class has instances");
    return acc / static_cast<double>(total);
}

} // namespace bpd
