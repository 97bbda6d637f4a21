#pragma once

// Assembly of the seven components into the full forward paths and the
// inference rule.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpd/data.hpp"
#include "bpd/nets.hpp"
#include "bpd/tensor.hpp"

namespace bpd {

template <class S>
struct BpdNetworks {
    Encoder<S> encoder;
    Disentangler<S> dis_sig;   // D
    Disentangler<S> dis_red;   // D'
    Classifier<S> cls_sig;     // C
    Classifier<S> cls_red;     // C'
    Reconstructor<S> recon;    // R
    MiNetwork<S> mi_net;       // M
    std::size_t class_count = 0;
    std::size_t latent_dim = 0;

    BpdNetworks() = default;
    BpdNetworks(const EncoderSpec& spec, std::size_t classes, double dropout_rate, unsigned seed) {
        if (classes < 2) throw std::invalid_argument("BpdNetworks: class_count must be >= 2");
        std::mt19937 rng(seed);
        encoder = Encoder<S>(spec, rng);
        dis_sig = Disentangler<S>(spec.latent_dim, rng);
        dis_red = Disentangler<S>(spec.latent_dim, rng);
        cls_sig = Classifier<S>(spec.latent_dim, classes, dropout_rate, rng);
        cls_red = Classifier<S>(spec.latent_dim, classes, dropout_rate, rng);
        recon = Reconstructor<S>(spec.latent_dim, rng);
        mi_net = MiNetwork<S>(spec.latent_dim, rng);
        class_count = classes;
        latent_dim = spec.latent_dim;
    }

    std::vector<Tensor<S>*> all_params() {
        std::vector<Tensor<S>*> out;
        auto append = [&out](std::vector<Tensor<S>*> ps) {
            out.insert(out.end(), ps.begin(), ps.end());
        };
        append(encoder.params());
        append(dis_sig.params());
        append(dis_red.params());
        append(cls_sig.params());
        append(cls_red.params());
        append(recon.params());
        append(mi_net.params());
        return out;
    }
};

template <class S>
struct ForwardBundle {
    Tensor<S> enc;    // E(x)
    Tensor<S> z_sig;  // D(E(x))
    Tensor<S> z_red;  // D'(E(x))
    Tensor<S> p_sig;  // C(z_sig)
    Tensor<S> p_red;  // C'(z_red)
    Tensor<S> recon;  // R(z_sig, z_red)
};

template <class S>
ForwardBundle<S> full_forward(BpdNetworks<S>& nets, const Tensor<S>& batch, bool train,
                              std::mt19937& rng) {
    ForwardBundle<S> b;
    b.enc = nets.encoder.forward(batch, train);
    b.z_sig = nets.dis_sig.forward(b.enc, train);
    b.z_red = nets.dis_red.forward(b.enc, train);
    b.p_sig = nets.cls_sig.forward(b.z_sig, train, rng);
    b.p_red = nets.cls_red.forward(b.z_red, train, rng);
    b.recon = nets.recon.forward(b.z_sig, b.z_red);
    return b;
}

// Inference: argmax over C(D(E(x))), only these three
// components participate. Labels are 1-based; ties go to the lowest index.
template <class S>
std::vector<int> infer(BpdNetworks<S>& nets, const Tensor<S>& batch) {
    std::mt19937 unused_rng(0); // eval path never draws from it
    Tensor<S> enc = nets.encoder.forward(batch, false);
    Tensor<S> z_sig = nets.dis_sig.forward(enc, false);
    Tensor<S> p = nets.cls_sig.forward(z_sig, false, unused_rng);
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

enum FeatureColumns : unsigned {
    kExportZSig = 1u,
    kExportZRed = 2u,
    kExportEnc = 4u,
};

// One row per segment: segment id, subject, true label, then the selected
// feature blocks. Floating point rendered with 6 significant digits.
template <class S>
void export_features(BpdNetworks<S>& nets, const SegmentDataset& dataset, std::ostream& out,
                     unsigned columns = kExportZSig, std::size_t batch_size = 64) {
    if (columns == 0) throw std::invalid_argument("export_features: no feature columns selected");
    std::mt19937 unused_rng(0);

    out << "segment_id,subject,label";
    std::size_t feat_cols = 0;
    if (columns & kExportZSig) feat_cols += nets.latent_dim;
    if (columns & kExportZRed) feat_cols += nets.latent_dim;
    if (columns & kExportEnc) feat_cols += nets.latent_dim;
    for (std::size_t j = 0; j < feat_cols; ++j) out << ",f" << j;
    out << '\n';
    if (!out) throw std::runtime_error("export_features: write failed");

    const std::size_t n = dataset.size();
    char buf[32];
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t count = std::min(batch_size, n - start);
        Tensor<S> batch = dataset.batch<S>(start, count);
        Tensor<S> enc = nets.encoder.forward(batch, false);
        Tensor<S> z_sig = nets.dis_sig.forward(enc, false);
        Tensor<S> z_red = nets.dis_red.forward(enc, false);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t row = start + i;
            out << row << ',' << dataset.subjects[row] << ',' << dataset.labels[row];
            auto emit = [&](const Tensor<S>& t) {
                for (std::size_t j = 0; j < nets.latent_dim; ++j) {
                    std::snprintf(buf, sizeof(buf), "%.6g",
                                  static_cast<double>(t.values()[i * nets.latent_dim + j]));
                    out << ',' << buf;
                }
            };
            if (columns & kExportZSig) emit(z_sig);
            if (columns & kExportZRed) emit(z_red);
            if (columns & kExportEnc) emit(enc);
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("export_features: write failed");
}

} // namespace bpd
