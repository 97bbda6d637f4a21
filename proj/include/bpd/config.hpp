#pragma once

// Sectioned key-value run configuration. Unknown keys are rejected with the
// nearest valid key named; the resolved config (defaults applied) can be
// echoed back as text.

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bpd/data.hpp"
#include "bpd/protocol.hpp"
#include "bpd/trainer.hpp"

namespace bpd {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RunConfig {
    TrainConfig train;
    // data
    std::string source = "synth"; // synth | manifest
    std::string manifest_path;
    std::size_t window = 168;
    double overlap = 0.5;
    bool normalize = true;
    SynthSpec synth;
    // protocol
    SplitKind protocol = SplitKind::loso;
    std::set<std::string> holdout_test;
    ModelKind model = ModelKind::bpd;
};

namespace detail {

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::string nearest_key(const std::string& key, const std::vector<std::string>& valid) {
    std::string best = valid.front();
    std::size_t best_d = levenshtein(key, best);
    for (const auto& v : valid) {
        const std::size_t d = levenshtein(key, v);
        if (d < best_d) {
            best_d = d;
            best = v;
        }
    }
    return best;
}

inline bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(where + ": expected boolean, got '" + v + "'");
}

} // namespace detail

inline RunConfig parse_run_config(std::istream& in, const std::string& origin) {
    static const std::vector<std::string> train_keys = {
        "lr",        "batch_size",   "max_epoch", "seed",
        "encoder",   "latent_dim",   "dropout_rate", "mine_mode",
        "ne_form",   "convergence_patience",      "convergence_delta"};
    static const std::vector<std::string> data_keys = {
        "source",          "manifest",        "window",       "overlap",
        "normalize",       "synth_classes",   "synth_subjects", "synth_channels",
        "synth_window",    "synth_segments",  "synth_noise_std",
        "synth_amplitude", "synth_offset",    "synth_frequency", "synth_seed"};
    static const std::vector<std::string> protocol_keys = {"kind", "holdout_test", "model"};

    RunConfig cfg;
    std::string section = "train";
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            if (section != "train" && section != "data" && section != "protocol") {
                throw ConfigError(where + ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));

        const std::vector<std::string>& valid =
            section == "train" ? train_keys : section == "data" ? data_keys : protocol_keys;
        if (std::find(valid.begin(), valid.end(), key) == valid.end()) {
            throw ConfigError(where + ": unknown key '" + key + "' in [" + section +
                              "]; nearest valid key is '" + detail::nearest_key(key, valid) + "'");
        }

        try {
            if (section == "train") {
                if (key == "lr") cfg.train.lr = std::stod(value);
                else if (key == "batch_size") cfg.train.batch_size = std::stoul(value);
                else if (key == "max_epoch") cfg.train.max_epoch = std::stoul(value);
                else if (key == "seed") cfg.train.seed = static_cast<unsigned>(std::stoul(value));
                else if (key == "encoder") cfg.train.encoder = encoder_kind_from_string(value);
                else if (key == "latent_dim") cfg.train.latent_dim = std::stoul(value);
                else if (key == "dropout_rate") cfg.train.dropout_rate = std::stod(value);
                else if (key == "mine_mode") {
                    if (value == "literal") cfg.train.mine_mode = MineMode::literal;
                    else if (value == "minimax") cfg.train.mine_mode = MineMode::minimax;
                    else throw ConfigError(where + ": mine_mode must be literal|minimax");
                } else if (key == "ne_form") {
                    if (value == "entropy") cfg.train.ne_form = NeForm::entropy;
                    else if (value == "true_class") cfg.train.ne_form = NeForm::true_class;
                    else throw ConfigError(where + ": ne_form must be entropy|true_class");
                } else if (key == "convergence_patience") {
                    cfg.train.convergence_patience = std::stoul(value);
                } else if (key == "convergence_delta") {
                    cfg.train.convergence_delta = std::stod(value);
                }
            } else if (section == "data") {
                if (key == "source") {
                    if (value != "synth" && value != "manifest") {
                        throw ConfigError(where + ": source must be synth|manifest");
                    }
                    cfg.source = value;
                } else if (key == "manifest") cfg.manifest_path = value;
                else if (key == "window") cfg.window = std::stoul(value);
                else if (key == "overlap") cfg.overlap = std::stod(value);
                else if (key == "normalize") cfg.normalize = detail::parse_bool(value, where);
                else if (key == "synth_classes") cfg.synth.class_count = std::stoul(value);
                else if (key == "synth_subjects") cfg.synth.subject_count = std::stoul(value);
                else if (key == "synth_channels") cfg.synth.channels = std::stoul(value);
                else if (key == "synth_window") cfg.synth.window_length = std::stoul(value);
                else if (key == "synth_segments") cfg.synth.segments_per_subject_per_class = std::stoul(value);
                else if (key == "synth_noise_std") cfg.synth.noise_std = std::stod(value);
                else if (key == "synth_amplitude") cfg.synth.nuisance_amplitude = std::stod(value);
                else if (key == "synth_offset") cfg.synth.nuisance_offset = std::stod(value);
                else if (key == "synth_frequency") cfg.synth.nuisance_frequency = std::stod(value);
                else if (key == "synth_seed") cfg.synth.seed = static_cast<unsigned>(std::stoul(value));
            } else { // protocol
                if (key == "kind") {
                    if (value == "loso") cfg.protocol = SplitKind::loso;
                    else if (value == "holdout") cfg.protocol = SplitKind::holdout;
                    else throw ConfigError(where + ": kind must be loso|holdout");
                } else if (key == "holdout_test") {
                    std::istringstream is(value);
                    std::string tok;
                    while (std::getline(is, tok, ',')) {
                        tok = detail::trim(tok);
                        if (!tok.empty()) cfg.holdout_test.insert(tok);
                    }
                } else if (key == "model") {
                    cfg.model = model_kind_from_string(value);
                }
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError(where + ": bad value '" + value + "' for key '" + key + "'");
        }
    }
    if (cfg.source == "manifest" && cfg.manifest_path.empty()) {
        throw ConfigError(origin + ": source = manifest requires a manifest path");
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse_run_config(in, path);
}

// Every key with its resolved value, in a fixed order. This text is echoed
// into the run directory and hashed into report metadata.
inline std::string resolve_config_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[train]\n";
    os << "lr = " << cfg.train.lr << '\n';
    os << "batch_size = " << cfg.train.batch_size << '\n';
    os << "max_epoch = " << cfg.train.max_epoch << '\n';
    os << "seed = " << cfg.train.seed << '\n';
    os << "encoder = " << (cfg.train.encoder == EncoderKind::cnn ? "cnn" : "convlstm") << '\n';
    os << "latent_dim = " << cfg.train.resolved_latent_dim() << '\n';
    os << "dropout_rate = " << cfg.train.dropout_rate << '\n';
    os << "mine_mode = " << (cfg.train.mine_mode == MineMode::literal ? "literal" : "minimax")
       << '\n';
    os << "ne_form = " << (cfg.train.ne_form == NeForm::entropy ? "entropy" : "true_class") << '\n';
    os << "convergence_patience = " << cfg.train.convergence_patience << '\n';
    os << "convergence_delta = " << cfg.train.convergence_delta << '\n';
    os << "[data]\n";
    os << "source = " << cfg.source << '\n';
    if (!cfg.manifest_path.empty()) os << "manifest = " << cfg.manifest_path << '\n';
    os << "window = " << cfg.window << '\n';
    os << "overlap = " << cfg.overlap << '\n';
    os << "normalize = " << (cfg.normalize ? "true" : "false") << '\n';
    if (cfg.source == "synth") {
        os << "synth_classes = " << cfg.synth.class_count << '\n';
        os << "synth_subjects = " << cfg.synth.subject_count << '\n';
        os << "synth_channels = " << cfg.synth.channels << '\n';
        os << "synth_window = " << cfg.synth.window_length << '\n';
        os << "synth_segments = " << cfg.synth.segments_per_subject_per_class << '\n';
        os << "synth_noise_std = " << cfg.synth.noise_std << '\n';
        os << "synth_amplitude = " << cfg.synth.nuisance_amplitude << '\n';
        os << "synth_offset = " << cfg.synth.nuisance_offset << '\n';
        os << "synth_frequency = " << cfg.synth.nuisance_frequency << '\n';
        os << "synth_seed = " << cfg.synth.seed << '\n';
    }
    os << "[protocol]\n";
    os << "kind = " << (cfg.protocol == SplitKind::loso ? "loso" : "holdout") << '\n';
    if (!cfg.holdout_test.empty()) {
        os << "holdout_test = ";
        bool first = true;
        for (const auto& s : cfg.holdout_test) {
            if (!first) os << ',';
            os << s;
            first = false;
        }
        os << '\n';
    }
    os << "model = " << (cfg.model == ModelKind::bpd ? "bpd" : "baseline") << '\n';
    return os.str();
}

inline std::string config_hash(const std::string& text) {
    // FNV-1a, stable across platforms
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline SegmentDataset load_configured_dataset(const RunConfig& cfg) {
    if (cfg.source == "synth") {
        return generate_synthetic(cfg.synth);
    }
    return load_manifest(cfg.manifest_path, cfg.window, cfg.overlap).dataset;
}

// Standalone SynthSpec file for the synth subcommand: flat key = value
// pairs using the synth_* keys of the run config (prefix optional).
inline SynthSpec parse_synth_spec(std::istream& in, const std::string& origin) {
    SynthSpec spec;
    std::string line;
    std::size_t lineno = 0;
    static const std::vector<std::string> keys = {
        "classes", "subjects", "channels", "window", "segments",
        "noise_std", "amplitude", "offset", "frequency", "seed"};
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.rfind("synth_", 0) == 0) key = key.substr(6);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError(where + ": unknown key '" + key + "'; nearest valid key is '" +
                              detail::nearest_key(key, keys) + "'");
        }
        try {
            if (key == "classes") spec.class_count = std::stoul(value);
            else if (key == "subjects") spec.subject_count = std::stoul(value);
            else if (key == "channels") spec.channels = std::stoul(value);
            else if (key == "window") spec.window_length = std::stoul(value);
            else if (key == "segments") spec.segments_per_subject_per_class = std::stoul(value);
            else if (key == "noise_std") spec.noise_std = std::stod(value);
            else if (key == "amplitude") spec.nuisance_amplitude = std::stod(value);
            else if (key == "offset") spec.nuisance_offset = std::stod(value);
            else if (key == "frequency") spec.nuisance_frequency = std::stod(value);
            else if (key == "seed") spec.seed = static_cast<unsigned>(std::stoul(value));
        } catch (const std::invalid_argument&) {
            throw ConfigError(where + ": bad value '" + value + "' for key '" + key + "'");
        }
    }
    spec.validate();
    return spec;
}

} // namespace bpd
