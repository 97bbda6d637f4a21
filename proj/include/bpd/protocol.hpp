#pragma once

// Leave-one-subject-out and hold-out evaluation: per-fold training, subject
// rows plus the Avg. row, class-wise scores pooled across folds, and the
// training diagnostics consumed by the regression suite.

#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "bpd/checkpoint.hpp"
#include "bpd/data.hpp"
#include "bpd/metrics.hpp"
#include "bpd/model.hpp"
#include "bpd/trainer.hpp"

#include <json.hpp>

namespace bpd {

enum class ModelKind { baseline_encoder, bpd };

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "baseline") return ModelKind::baseline_encoder;
    if (s == "bpd") return ModelKind::bpd;
    throw std::invalid_argument("unknown model kind: " + s + " (expected baseline|bpd)");
}

// Encoder followed directly by a classifier head, trained with
// cross-entropy only. The comparison rows of the evaluation tables.
template <class S>
struct BaselineNetworks {
    Encoder<S> encoder;
    Classifier<S> cls;
    std::size_t class_count = 0;

    BaselineNetworks() = default;
    BaselineNetworks(const EncoderSpec& spec, std::size_t classes, double dropout_rate,
                     unsigned seed) {
        std::mt19937 rng(seed);
        encoder = Encoder<S>(spec, rng);
        cls = Classifier<S>(spec.latent_dim, classes, dropout_rate, rng);
        class_count = classes;
    }

    std::vector<Tensor<S>*> params() {
        auto out = encoder.params();
        for (auto* p : cls.params()) out.push_back(p);
        return out;
    }
};

template <class S>
std::vector<int> infer_baseline(BaselineNetworks<S>& nets, const Tensor<S>& batch) {
    std::mt19937 unused_rng(0);
    Tensor<S> p = nets.cls.forward(nets.encoder.forward(batch, false), false, unused_rng);
    const std::size_t n = p.dim(0), k = p.dim(1);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const S* row = p.values().data() + i * k;
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        labels[i] = static_cast<int>(best) + 1;
    }
    return labels;
}

template <class S>
std::vector<EpochLog> fit_baseline(BaselineNetworks<S>& nets, const SegmentDataset& train,
                                   const TrainConfig& config) {
    config.validate();
    if (train.size() == 0) throw std::invalid_argument("fit_baseline: empty training dataset");
    Adam<S> opt(nets.params(), config.lr);
    std::mt19937 rng(config.seed);
    std::vector<EpochLog> logs;
    for (std::size_t epoch = 1; epoch <= config.max_epoch; ++epoch) {
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937 shuffle_rng(config.seed * 1000003u + static_cast<unsigned>(epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        EpochLog log;
        log.epoch = epoch;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, order.size() - start);
            if (count < 2) break;
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + count);
            Tensor<S> batch = train.gather<S>(idx);
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i) labels[i] = train.labels[idx[i]];

            opt.zero_grad();
            Tape<S> tape;
            Tensor<S> p = nets.cls.forward(nets.encoder.forward(batch, true), true, rng);
            Tensor<S> onehot = one_hot<S>(labels, nets.class_count);
            Tensor<S> loss =
                neg(mean(sum_last(mul(onehot, log_t(clamp_min(p, S(kProbFloor)))))));
            log.ce += static_cast<double>(loss.item());
            detail::check_finite(loss.item(), "baseline cross-entropy");
            tape.backward(loss);
            opt.step();
            ++steps;
        }
        log.ce /= static_cast<double>(steps);
        logs.push_back(log);
    }
    return logs;
}

struct FoldResult {
    std::string subject;  // test subject(s), '+'-joined for hold-out
    double macro_f1 = 0.0;
    ConfusionMatrix confusion;
    std::vector<EpochLog> epochs;
};

struct MetricsReport {
    std::string model;
    std::string protocol;
    unsigned seed = 0;
    std::string config_hash;
    std::vector<FoldResult> folds;
    double average_f1 = 0.0;            // arithmetic mean of fold values
    std::vector<double> classwise;      // pooled over folds
    ConfusionMatrix pooled;
};

struct ProtocolSettings {
    TrainConfig train;
    bool normalize = true;
    std::string config_hash; // of the resolved run config
};

template <class S>
MetricsReport run_protocol(const SegmentDataset& dataset, const SplitPlan& plan,
                           const ProtocolSettings& settings, ModelKind model_kind) {
    const std::size_t classes = dataset.class_count();
    MetricsReport report;
    report.model = model_kind == ModelKind::bpd ? "bpd" : "baseline";
    report.protocol = plan.kind == SplitKind::loso ? "loso" : "holdout";
    report.seed = settings.train.seed;
    report.config_hash = settings.config_hash;
    report.pooled = ConfusionMatrix(classes);

    EncoderSpec spec;
    spec.kind = settings.train.encoder;
    spec.input_channels = dataset.channels;
    spec.window_length = dataset.window_length;
    spec.latent_dim = settings.train.resolved_latent_dim();

    for (std::size_t fi = 0; fi < plan.folds.size(); ++fi) {
        const SplitFold& fold = plan.folds[fi];
        SegmentDataset train = dataset.filter_subjects(fold.train_subjects);
        SegmentDataset test = dataset.filter_subjects(fold.test_subjects);
        if (train.size() == 0 || test.size() == 0) {
            throw DataError("fold " + std::to_string(fi + 1) + ": empty train or test split");
        }
        if (settings.normalize) {
            const NormStats stats = compute_norm_stats(train);
            apply_norm_stats(stats, train);
            apply_norm_stats(stats, test);
        }

        TrainConfig cfg = settings.train;
        cfg.seed = settings.train.seed + static_cast<unsigned>(fi);

        FoldResult result;
        {
            std::string joined;
            for (const auto& s : fold.test_subjects) joined += joined.empty() ? s : "+" + s;
            result.subject = joined;
        }
        try {
            if (model_kind == ModelKind::bpd) {
                BpdNetworks<S> nets(spec, classes, cfg.dropout_rate, cfg.seed);
                FitResult fr = fit(nets, train, cfg);
                result.epochs = std::move(fr.epochs);
                result.confusion = evaluate_confusion(nets, test, classes);
            } else {
                BaselineNetworks<S> nets(spec, classes, cfg.dropout_rate, cfg.seed);
                result.epochs = fit_baseline(nets, train, cfg);
                ConfusionMatrix cm(classes);
                for (std::size_t start = 0; start < test.size(); start += cfg.batch_size) {
                    const std::size_t count = std::min(cfg.batch_size, test.size() - start);
                    Tensor<S> batch = test.batch<S>(start, count);
                    const auto pred = infer_baseline(nets, batch);
                    for (std::size_t i = 0; i < count; ++i) cm.add(test.labels[start + i], pred[i]);
                }
                result.confusion = std::move(cm);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("fold " + std::to_string(fi + 1) + " (" + result.subject +
                                     "): " + e.what());
        }
        result.macro_f1 = macro_f1(result.confusion);
        report.pooled += result.confusion;
        report.folds.push_back(std::move(result));
    }

    double acc = 0.0;
    for (const auto& f : report.folds) acc += f.macro_f1;
    report.average_f1 = acc / static_cast<double>(report.folds.size());
    report.classwise = classwise_f1(report.pooled);
    return report;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct DiagnosticSummary {
    std::vector<double> mine_trajectory;
    std::vector<double> entropy_trajectory;
    double mine_first = 0.0, mine_last = 0.0;
    double entropy_first = 0.0, entropy_last = 0.0;
    double recon_first = 0.0, recon_last = 0.0;
    bool mine_decreased = false;
    bool entropy_increased = false;
    bool recon_improved = false;
};

inline DiagnosticSummary diagnostics(const std::vector<EpochLog>& logs) {
    if (logs.empty()) throw std::invalid_argument("diagnostics: no epoch logs");
    DiagnosticSummary d;
    for (const auto& log : logs) {
        d.mine_trajectory.push_back(log.mine);
        d.entropy_trajectory.push_back(log.cred_entropy);
    }
    d.mine_first = logs.front().mine;
    d.mine_last = logs.back().mine;
    d.entropy_first = logs.front().cred_entropy;
    d.entropy_last = logs.back().cred_entropy;
    d.recon_first = logs.front().recon;
    d.recon_last = logs.back().recon;
    d.mine_decreased = d.mine_last < d.mine_first;
    d.entropy_increased = d.entropy_last > d.entropy_first;
    d.recon_improved = d.recon_last < d.recon_first;
    return d;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string format_f1(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

inline nlohmann::json epoch_log_to_json(const EpochLog& log) {
    nlohmann::json j{{"epoch", log.epoch}, {"ce", log.ce},       {"ne", log.ne},
                     {"mine", log.mine},   {"recon", log.recon}, {"cred_entropy", log.cred_entropy}};
    if (!std::isnan(log.val_f1)) j["val_f1"] = log.val_f1;
    return j;
}

inline nlohmann::json report_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["model"] = report.model;
    j["protocol"] = report.protocol;
    j["seed"] = report.seed;
    j["config_hash"] = report.config_hash;
    j["average_f1"] = format_f1(report.average_f1);
    auto& subjects = j["subjects"] = nlohmann::json::array();
    for (const auto& f : report.folds) {
        nlohmann::json row;
        row["subject"] = f.subject;
        row["macro_f1"] = format_f1(f.macro_f1);
        row["confusion"] = f.confusion.counts;
        subjects.push_back(std::move(row));
    }
    auto& cw = j["classwise_f1"] = nlohmann::json::array();
    for (double v : report.classwise) {
        if (std::isnan(v))
            cw.push_back(nullptr);
        else
            cw.push_back(format_f1(v));
    }
    return j;
}

// Aligned plain-text table: one row per test subject, then the Avg. row.
inline std::string report_to_table(const MetricsReport& report) {
    std::size_t width = 7; // "Subject"
    for (const auto& f : report.folds) width = std::max(width, f.subject.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width + 2)) << "Subject" << report.model << '\n';
    for (const auto& f : report.folds) {
        os << std::left << std::setw(static_cast<int>(width + 2)) << f.subject
           << format_f1(f.macro_f1) << '\n';
    }
    os << std::left << std::setw(static_cast<int>(width + 2)) << "Avg."
       << format_f1(report.average_f1) << '\n';
    return os.str();
}

} // namespace bpd
