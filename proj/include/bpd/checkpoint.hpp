#pragma once

// Versioned binary checkpoints: network parameters, batch-norm running
// statistics, optimizer state, and the resolved config text. Round-trips
// are bit-exact.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpd/model.hpp"
#include "bpd/trainer.hpp"

namespace bpd {

struct CheckpointMeta {
    EncoderKind kind = EncoderKind::cnn;
    std::size_t input_channels = 0;
    std::size_t window_length = 0;
    std::size_t latent_dim = 0;
    std::size_t class_count = 0;
    double dropout_rate = 0.5;
    std::string config_text; // resolved run config, echoed verbatim
};

namespace detail {

constexpr char kCkptMagic[8] = {'B', 'P', 'D', 'C', 'K', 'P', 'T', '1'};

inline void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

template <class S>
void write_vec(std::ostream& out, const std::vector<S>& v) {
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(S)));
}

template <class S>
std::vector<S> read_vec(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    std::vector<S> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(S)));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

template <class S>
void read_vec_into(std::istream& in, std::vector<S>& v) {
    const std::uint64_t n = read_u64(in);
    if (n != v.size()) {
        throw std::runtime_error("checkpoint: buffer size mismatch (" + std::to_string(n) +
                                 " vs " + std::to_string(v.size()) + ")");
    }
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(S)));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
}

// Every mutable buffer of the networks, in a fixed order.
template <class S>
std::vector<std::vector<S>*> state_buffers(BpdNetworks<S>& nets) {
    std::vector<std::vector<S>*> out;
    for (auto* p : nets.all_params()) out.push_back(&p->values());
    out.push_back(&nets.dis_sig.bn.running_mean);
    out.push_back(&nets.dis_sig.bn.running_var);
    out.push_back(&nets.dis_red.bn.running_mean);
    out.push_back(&nets.dis_red.bn.running_var);
    return out;
}

} // namespace detail

// Optimizer state detached from the live parameter pointers, so it can be
// captured before a save and restored after the networks are rebuilt.
template <class S>
struct OptimizerSnapshot {
    struct Group {
        long step = 0;
        std::vector<std::vector<S>> m;
        std::vector<std::vector<S>> v;
    };
    std::vector<Group> groups;

    static OptimizerSnapshot capture(BpdOptimizers<S>& opts) {
        OptimizerSnapshot snap;
        for (Adam<S>* o : opts.all()) {
            Group g;
            g.step = o->step_count();
            g.m = o->first_moments();
            g.v = o->second_moments();
            snap.groups.push_back(std::move(g));
        }
        return snap;
    }

    void restore(BpdOptimizers<S>& opts) const {
        auto os = opts.all();
        if (groups.size() != os.size()) {
            throw std::runtime_error("checkpoint: optimizer group count mismatch");
        }
        for (std::size_t i = 0; i < os.size(); ++i) {
            os[i]->step_count_ref() = groups[i].step;
            if (groups[i].m.size() != os[i]->first_moments().size()) {
                throw std::runtime_error("checkpoint: optimizer parameter count mismatch");
            }
            os[i]->first_moments() = groups[i].m;
            os[i]->second_moments() = groups[i].v;
        }
    }
};

template <class S>
void save_checkpoint(const std::string& path, const CheckpointMeta& meta, BpdNetworks<S>& nets,
                     const OptimizerSnapshot<S>* opts = nullptr) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
    out.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));
    detail::write_u64(out, sizeof(S));
    detail::write_u64(out, meta.kind == EncoderKind::cnn ? 0 : 1);
    detail::write_u64(out, meta.input_channels);
    detail::write_u64(out, meta.window_length);
    detail::write_u64(out, meta.latent_dim);
    detail::write_u64(out, meta.class_count);
    out.write(reinterpret_cast<const char*>(&meta.dropout_rate), sizeof(double));
    detail::write_u64(out, meta.config_text.size());
    out.write(meta.config_text.data(), static_cast<std::streamsize>(meta.config_text.size()));

    for (const auto* buf : detail::state_buffers(nets)) detail::write_vec(out, *buf);

    detail::write_u64(out, opts ? 1 : 0);
    if (opts) {
        for (const auto& g : opts->groups) {
            detail::write_u64(out, static_cast<std::uint64_t>(g.step));
            detail::write_u64(out, g.m.size());
            for (const auto& m : g.m) detail::write_vec(out, m);
            for (const auto& v : g.v) detail::write_vec(out, v);
        }
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

// Reconstructs the networks from the stored geometry, then loads every
// buffer. Optimizer state, when present, lands in opts_out.
template <class S>
CheckpointMeta load_checkpoint(const std::string& path, BpdNetworks<S>& nets,
                               OptimizerSnapshot<S>* opts_out = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, detail::kCkptMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
    }
    if (detail::read_u64(in) != sizeof(S)) {
        throw std::runtime_error("checkpoint: scalar width mismatch");
    }
    CheckpointMeta meta;
    meta.kind = detail::read_u64(in) == 0 ? EncoderKind::cnn : EncoderKind::convlstm;
    meta.input_channels = detail::read_u64(in);
    meta.window_length = detail::read_u64(in);
    meta.latent_dim = detail::read_u64(in);
    meta.class_count = detail::read_u64(in);
    in.read(reinterpret_cast<char*>(&meta.dropout_rate), sizeof(double));
    const std::uint64_t cfg_len = detail::read_u64(in);
    meta.config_text.resize(cfg_len);
    in.read(meta.config_text.data(), static_cast<std::streamsize>(cfg_len));
    if (!in) throw std::runtime_error("checkpoint: truncated header");

    EncoderSpec spec{meta.kind, meta.input_channels, meta.window_length, meta.latent_dim};
    nets = BpdNetworks<S>(spec, meta.class_count, meta.dropout_rate, /*seed=*/0);
    for (auto* buf : detail::state_buffers(nets)) detail::read_vec_into(in, *buf);

    const bool has_opt = detail::read_u64(in) != 0;
    if (has_opt && opts_out) {
        opts_out->groups.clear();
        for (std::size_t gi = 0; gi < 7; ++gi) {
            typename OptimizerSnapshot<S>::Group g;
            g.step = static_cast<long>(detail::read_u64(in));
            const std::uint64_t nparams = detail::read_u64(in);
            g.m.resize(nparams);
            g.v.resize(nparams);
            for (auto& m : g.m) m = detail::read_vec<S>(in);
            for (auto& v : g.v) v = detail::read_vec<S>(in);
            opts_out->groups.push_back(std::move(g));
        }
    }
    return meta;
}

} // namespace bpd
