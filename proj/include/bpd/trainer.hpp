#pragma once

// The four-phase alternating optimization, per-epoch logging, and
// convergence handling.

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpd/data.hpp"
#include "bpd/losses.hpp"
#include "bpd/metrics.hpp"
#include "bpd/model.hpp"
#include "bpd/optimizer.hpp"

namespace bpd {

enum class MineMode { literal, minimax };
enum class NeForm { entropy, true_class };

struct TrainConfig {
    double lr = 0.0001;
    std::size_t batch_size = 64;
    std::size_t max_epoch = 300;
    unsigned seed = 1;
    EncoderKind encoder = EncoderKind::cnn;
    std::size_t latent_dim = 0; // 0 means the encoder default
    double dropout_rate = 0.5;
    MineMode mine_mode = MineMode::literal;
    NeForm ne_form = NeForm::entropy;
    std::size_t convergence_patience = 20;
    double convergence_delta = 1e-4;

    void validate() const {
        if (lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
        if (batch_size < 2) throw std::invalid_argument("config: batch_size must be >= 2");
        if (max_epoch < 1) throw std::invalid_argument("config: max_epoch must be >= 1");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
            throw std::invalid_argument("config: dropout_rate must be in [0,1)");
        }
    }

    std::size_t resolved_latent_dim() const {
        return latent_dim ? latent_dim : default_latent_dim(encoder);
    }
};

// One Adam state per component group, so phases never contaminate each
// other's moment estimates.
template <class S>
struct BpdOptimizers {
    Adam<S> encoder, dis_sig, dis_red, cls_sig, cls_red, recon, mi_net;

    BpdOptimizers(BpdNetworks<S>& nets, double lr)
        : encoder(nets.encoder.params(), lr),
          dis_sig(nets.dis_sig.params(), lr),
          dis_red(nets.dis_red.params(), lr),
          cls_sig(nets.cls_sig.params(), lr),
          cls_red(nets.cls_red.params(), lr),
          recon(nets.recon.params(), lr),
          mi_net(nets.mi_net.params(), lr) {}

    void zero_all() {
        for (Adam<S>* o : all()) o->zero_grad();
    }

    std::vector<Adam<S>*> all() {
        return {&encoder, &dis_sig, &dis_red, &cls_sig, &cls_red, &recon, &mi_net};
    }
};

struct PhaseLosses {
    double ce = 0.0;
    double ne = 0.0;
    double mine = 0.0;
    double recon = 0.0;
    double cred_entropy = 0.0; // mean Shannon entropy of C' rows, nats
};

struct EpochLog {
    std::size_t epoch = 0; // 1-based
    double ce = 0.0;
    double ne = 0.0;
    double mine = 0.0;
    double recon = 0.0;
    double cred_entropy = 0.0;
    double val_f1 = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline void check_finite(double value, const char* phase) {
    if (!std::isfinite(value)) {
        throw std::runtime_error(std::string("non-finite loss in phase '") + phase + "'");
    }
}

template <class S>
double mean_row_entropy(const Tensor<S>& probs) {
    const std::size_t n = probs.dim(0), k = probs.dim(1);
    double acc = 0.0;
    for (std::size_t i = 0; i < n * k; ++i) {
        const double p = std::max(static_cast<double>(probs.values()[i]), kProbFloor);
        acc -= p * std::log(p);
    }
    return acc / static_cast<double>(n);
}

template <class S>
class FreezeEncoder {
public:
    explicit FreezeEncoder(BpdNetworks<S>& nets) : params_(nets.encoder.params()) {
        for (auto* p : params_) p->set_requires_grad(false);
    }
    ~FreezeEncoder() {
        for (auto* p : params_) p->set_requires_grad(true);
    }

private:
    std::vector<Tensor<S>*> params_;
};

} // namespace detail

// Executes the four phases in order on the same mini-batch, each phase with
// its own forward pass against the current parameters:
//   1. E, D, D', C, C'  minimize the dual cross-entropy
//   2. E, D'            minimize the negative entropy, classifiers fixed
//   3. D, D', M         minimize the dependency bound (literal mode);
//                       in minimax mode M ascends while D, D' descend
//   4. D, D', R         minimize the reconstruction distance, encoder fixed
// phase_hook, when set, fires after each phase's parameter updates with the
// 1-based phase number; used by the phase-isolation checks.
template <class S>
PhaseLosses train_step(BpdNetworks<S>& nets, const Tensor<S>& batch,
                       const std::vector<int>& labels, const TrainConfig& config,
                       BpdOptimizers<S>& opts, std::mt19937& rng,
                       const std::function<void(int)>& phase_hook = {}) {
    if (batch.dim(0) < 2) throw std::invalid_argument("train_step: batch must hold >= 2 segments");
    PhaseLosses out;

    { // phase 1: disentanglement cross-entropy
        opts.zero_all();
        Tape<S> tape;
        ForwardBundle<S> b = full_forward(nets, batch, true, rng);
        Tensor<S> loss = ce_loss(b.p_sig, b.p_red, labels);
        out.ce = static_cast<double>(loss.item());
        detail::check_finite(out.ce, "cross-entropy");
        tape.backward(loss);
        opts.encoder.step();
        opts.dis_sig.step();
        opts.dis_red.step();
        opts.cls_sig.step();
        opts.cls_red.step();
        if (phase_hook) phase_hook(1);
    }

    { // phase 2: uncertainty maximization on the redundant branch
        opts.zero_all();
        Tape<S> tape;
        Tensor<S> enc = nets.encoder.forward(batch, true);
        Tensor<S> z_red = nets.dis_red.forward(enc, true);
        Tensor<S> p_red = nets.cls_red.forward(z_red, true, rng);
        Tensor<S> loss = config.ne_form == NeForm::entropy ? ne_loss(p_red)
                                                           : ne_loss_true_class(p_red, labels);
        out.ne = static_cast<double>(loss.item());
        out.cred_entropy = detail::mean_row_entropy(p_red);
        detail::check_finite(out.ne, "negative-entropy");
        tape.backward(loss);
        opts.encoder.step();
        opts.dis_red.step();
        if (phase_hook) phase_hook(2);
    }

    { // phase 3: dependency reduction
        opts.zero_all();
        detail::FreezeEncoder<S> freeze(nets);
        Tape<S> tape;
        Tensor<S> enc = nets.encoder.forward(batch, true);
        Tensor<S> z_sig = nets.dis_sig.forward(enc, true);
        Tensor<S> z_red = nets.dis_red.forward(enc, true);
        auto perm = shuffle_permutation(batch.dim(0), rng);
        Tensor<S> loss = mine_loss(nets.mi_net, z_sig, z_red, perm);
        out.mine = static_cast<double>(loss.item());
        detail::check_finite(out.mine, "dependency-reduction");
        tape.backward(loss);
        opts.dis_sig.step();
        opts.dis_red.step();
        if (config.mine_mode == MineMode::literal) {
            opts.mi_net.step();
        } else {
            opts.mi_net.step_ascend();
        }
        if (phase_hook) phase_hook(3);
    }

    { // phase 4: reconstruction
        opts.zero_all();
        detail::FreezeEncoder<S> freeze(nets);
        Tape<S> tape;
        Tensor<S> enc = nets.encoder.forward(batch, true);
        Tensor<S> z_sig = nets.dis_sig.forward(enc, true);
        Tensor<S> z_red = nets.dis_red.forward(enc, true);
        Tensor<S> rec = nets.recon.forward(z_sig, z_red);
        Tensor<S> loss = recon_loss(enc, rec);
        out.recon = static_cast<double>(loss.item());
        detail::check_finite(out.recon, "reconstruction");
        tape.backward(loss);
        opts.dis_sig.step();
        opts.dis_red.step();
        opts.recon.step();
        if (phase_hook) phase_hook(4);
    }

    return out;
}

template <class S>
ConfusionMatrix evaluate_confusion(BpdNetworks<S>& nets, const SegmentDataset& data,
                                   std::size_t classes, std::size_t batch_size = 64) {
    ConfusionMatrix cm(classes);
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t count = std::min(batch_size, data.size() - start);
        Tensor<S> batch = data.batch<S>(start, count);
        const auto pred = infer(nets, batch);
        for (std::size_t i = 0; i < count; ++i) cm.add(data.labels[start + i], pred[i]);
    }
    return cm;
}

struct FitResult {
    std::vector<EpochLog> epochs;
    bool converged_early = false;
};

// Epoch loop: seeded shuffle, mini-batches of batch_size (partial final
// batch kept only when it has >= 2 segments), early stop when the monitored
// quantity (validation macro-F1 when a validation split exists, else the
// negated ce+recon training loss) fails to improve by convergence_delta for
// convergence_patience consecutive epochs.
template <class S>
FitResult fit(BpdNetworks<S>& nets, const SegmentDataset& train, const TrainConfig& config,
              const SegmentDataset* validation = nullptr) {
    config.validate();
    if (train.size() == 0) throw std::invalid_argument("fit: empty training dataset");

    BpdOptimizers<S> opts(nets, config.lr);
    std::mt19937 rng(config.seed);

    FitResult result;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t stall = 0;

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
            if (count < 2) break; // mine precondition
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + count);
            Tensor<S> batch = train.gather<S>(idx);
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i) labels[i] = train.labels[idx[i]];
            const PhaseLosses pl = train_step(nets, batch, labels, config, opts, rng);
            log.ce += pl.ce;
            log.ne += pl.ne;
            log.mine += pl.mine;
            log.recon += pl.recon;
            log.cred_entropy += pl.cred_entropy;
            ++steps;
        }
        if (steps == 0) throw std::invalid_argument("fit: no batch satisfies the >=2 segment rule");
        log.ce /= static_cast<double>(steps);
        log.ne /= static_cast<double>(steps);
        log.mine /= static_cast<double>(steps);
        log.recon /= static_cast<double>(steps);
        log.cred_entropy /= static_cast<double>(steps);

        double monitored;
        if (validation) {
            log.val_f1 = macro_f1(evaluate_confusion(nets, *validation, nets.class_count));
            monitored = log.val_f1;
        } else {
            monitored = -(log.ce + log.recon);
        }
        result.epochs.push_back(log);

        if (monitored > best + config.convergence_delta) {
            best = monitored;
            stall = 0;
        } else if (++stall >= config.convergence_patience) {
            result.converged_early = true;
            break;
        }
    }
    return result;
}

} // namespace bpd
