// Command-line driver: train, loso, eval, synth, gradcheck, export-features.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpd/checkpoint.hpp"
#include "bpd/config.hpp"
#include "bpd/gradcheck_suite.hpp"
#include "bpd/protocol.hpp"

namespace fs = std::filesystem;
using Scalar = float;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "runs/latest";
    long seed_override = -1;
    std::string model_override;
};

bpd::RunConfig load_config(const GlobalOpts& g) {
    bpd::RunConfig cfg;
    if (!g.config_path.empty()) cfg = bpd::load_run_config(g.config_path);
    if (g.seed_override >= 0) cfg.train.seed = static_cast<unsigned>(g.seed_override);
    if (!g.model_override.empty()) cfg.model = bpd::model_kind_from_string(g.model_override);
    cfg.train.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// wall-clock timestamps live only in this file so reruns stay comparable
void write_metadata(const fs::path& dir, const std::string& command,
                    const std::string& config_hash) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    nlohmann::json j{{"command", command}, {"timestamp", stamp}, {"config_hash", config_hash}};
    write_text(dir / "metadata.json", j.dump(2) + "\n");
}

std::string epochs_to_jsonl(const std::vector<bpd::EpochLog>& logs) {
    std::string out;
    for (const auto& log : logs) out += bpd::epoch_log_to_json(log).dump() + "\n";
    return out;
}

bpd::SplitPlan plan_for(const bpd::RunConfig& cfg, const bpd::SegmentDataset& ds,
                        bpd::SplitKind kind) {
    return bpd::plan_splits(ds, kind, cfg.holdout_test);
}

int cmd_train(const GlobalOpts& g) {
    bpd::RunConfig cfg = load_config(g);
    const std::string resolved = bpd::resolve_config_text(cfg);
    const std::string hash = bpd::config_hash(resolved);

    bpd::SegmentDataset full = bpd::load_configured_dataset(cfg);
    bpd::SplitPlan plan = plan_for(cfg, full, cfg.protocol);
    // train on the first fold's training portion, validate on its test part
    const bpd::SplitFold& fold = plan.folds.front();
    bpd::SegmentDataset train = full.filter_subjects(fold.train_subjects);
    bpd::SegmentDataset val = full.filter_subjects(fold.test_subjects);
    if (cfg.normalize) {
        const bpd::NormStats stats = bpd::compute_norm_stats(train);
        bpd::apply_norm_stats(stats, train);
        bpd::apply_norm_stats(stats, val);
    }

    const std::size_t classes = full.class_count();
    bpd::EncoderSpec spec{cfg.train.encoder, full.channels, full.window_length,
                          cfg.train.resolved_latent_dim()};
    bpd::BpdNetworks<Scalar> nets(spec, classes, cfg.train.dropout_rate, cfg.train.seed);

    fs::create_directories(g.out_dir);
    write_text(fs::path(g.out_dir) / "config.resolved", resolved);

    bpd::FitResult fit_result = bpd::fit(nets, train, cfg.train, &val);

    write_text(fs::path(g.out_dir) / "epochs.jsonl", epochs_to_jsonl(fit_result.epochs));
    bpd::CheckpointMeta meta;
    meta.kind = spec.kind;
    meta.input_channels = spec.input_channels;
    meta.window_length = spec.window_length;
    meta.latent_dim = spec.latent_dim;
    meta.class_count = classes;
    meta.dropout_rate = cfg.train.dropout_rate;
    meta.config_text = resolved;
    bpd::save_checkpoint((fs::path(g.out_dir) / "model.ckpt").string(), meta, nets);
    write_metadata(g.out_dir, "train", hash);
    std::cout << "trained " << fit_result.epochs.size() << " epochs"
              << (fit_result.converged_early ? " (converged early)" : "") << ", run dir "
              << g.out_dir << "\n";
    return 0;
}

int run_protocol_command(const GlobalOpts& g, bpd::SplitKind kind, const char* command) {
    bpd::RunConfig cfg = load_config(g);
    const std::string resolved = bpd::resolve_config_text(cfg);

    bpd::SegmentDataset full = bpd::load_configured_dataset(cfg);
    bpd::SplitPlan plan = plan_for(cfg, full, kind);

    bpd::ProtocolSettings settings;
    settings.train = cfg.train;
    settings.normalize = cfg.normalize;
    settings.config_hash = bpd::config_hash(resolved);

    bpd::MetricsReport report = bpd::run_protocol<Scalar>(full, plan, settings, cfg.model);

    fs::create_directories(g.out_dir);
    write_text(fs::path(g.out_dir) / "config.resolved", resolved);
    write_text(fs::path(g.out_dir) / "report.json", bpd::report_to_json(report).dump(2) + "\n");
    write_text(fs::path(g.out_dir) / "report.txt", bpd::report_to_table(report));
    std::string all_epochs;
    for (const auto& fold : report.folds) {
        for (const auto& log : fold.epochs) {
            nlohmann::json j = bpd::epoch_log_to_json(log);
            j["subject"] = fold.subject;
            all_epochs += j.dump() + "\n";
        }
    }
    write_text(fs::path(g.out_dir) / "epochs.jsonl", all_epochs);
    write_metadata(g.out_dir, command, settings.config_hash);
    std::cout << bpd::report_to_table(report);
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& checkpoint_path) {
    bpd::RunConfig cfg = load_config(g);
    bpd::BpdNetworks<Scalar> nets;
    bpd::CheckpointMeta meta = bpd::load_checkpoint<Scalar>(checkpoint_path, nets);

    bpd::SegmentDataset ds = bpd::load_configured_dataset(cfg);
    if (ds.channels != meta.input_channels || ds.window_length != meta.window_length) {
        throw std::runtime_error(
            "dataset does not match checkpoint: channels " + std::to_string(ds.channels) + " vs " +
            std::to_string(meta.input_channels) + ", window " + std::to_string(ds.window_length) +
            " vs " + std::to_string(meta.window_length));
    }
    if (cfg.normalize) {
        const bpd::NormStats stats = bpd::compute_norm_stats(ds);
        bpd::apply_norm_stats(stats, ds);
    }
    bpd::ConfusionMatrix cm = bpd::evaluate_confusion(nets, ds, meta.class_count);
    nlohmann::json j;
    j["segments"] = cm.total();
    j["macro_f1"] = bpd::format_f1(bpd::macro_f1(cm));
    auto& cw = j["classwise_f1"] = nlohmann::json::array();
    for (double v : bpd::classwise_f1(cm)) {
        if (std::isnan(v))
            cw.push_back(nullptr);
        else
            cw.push_back(bpd::format_f1(v));
    }
    j["confusion"] = cm.counts;
    fs::create_directories(g.out_dir);
    write_text(fs::path(g.out_dir) / "eval.json", j.dump(2) + "\n");
    write_metadata(g.out_dir, "eval", "");
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_synth(const GlobalOpts& g, const std::string& spec_path) {
    bpd::SynthSpec spec;
    if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) throw std::runtime_error("cannot open spec '" + spec_path + "'");
        spec = bpd::parse_synth_spec(in, spec_path);
    }
    if (g.seed_override >= 0) spec.seed = static_cast<unsigned>(g.seed_override);
    bpd::SegmentDataset ds = bpd::generate_synthetic(spec);

    fs::create_directories(g.out_dir);
    char buf[32];
    for (const auto& subject : ds.subject_ids()) {
        std::string text;
        std::size_t row = 0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.subjects[i] != subject) continue;
            const double* seg = ds.segment(i);
            for (std::size_t t = 0; t < ds.window_length; ++t) {
                std::snprintf(buf, sizeof(buf), "%zu", row++);
                text += buf;
                for (std::size_t c = 0; c < ds.channels; ++c) {
                    std::snprintf(buf, sizeof(buf), "%.17g", seg[c * ds.window_length + t]);
                    text += ',';
                    text += buf;
                }
                text += ',' + std::to_string(ds.labels[i]) + '\n';
            }
        }
        write_text(fs::path(g.out_dir) / (subject + ".dat"), text);
    }

    std::string manifest = "name = synth\nchannels = " + std::to_string(ds.channels) +
                           "\nnull_label = 0\nlabels = ";
    bool first = true;
    for (const auto& [label, name] : ds.label_names) {
        if (!first) manifest += ", ";
        manifest += std::to_string(label) + "=" + name;
        first = false;
    }
    manifest += "\n[subjects]\n";
    for (const auto& subject : ds.subject_ids()) manifest += subject + " = " + subject + ".dat\n";
    write_text(fs::path(g.out_dir) / "synth.manifest", manifest);
    std::cout << "wrote " << ds.subject_ids().size() << " subject files and synth.manifest to "
              << g.out_dir << "\n";
    return 0;
}

int cmd_gradcheck() {
    bool all_passed = true;
    for (const auto& r : bpd::run_gradcheck_suite()) {
        std::printf("%-24s max_rel_error %.3e tolerance %.0e %s\n", r.name.c_str(),
                    r.max_rel_error, r.tolerance, r.passed ? "pass" : "FAIL");
        all_passed = all_passed && r.passed;
    }
    return all_passed ? 0 : 1;
}

int cmd_export_features(const GlobalOpts& g, const std::string& checkpoint_path,
                        const std::string& out_file, bool zsig, bool zred, bool enc) {
    bpd::RunConfig cfg = load_config(g);
    bpd::BpdNetworks<Scalar> nets;
    bpd::CheckpointMeta meta = bpd::load_checkpoint<Scalar>(checkpoint_path, nets);

    bpd::SegmentDataset ds = bpd::load_configured_dataset(cfg);
    std::string mismatch;
    if (ds.channels != meta.input_channels) {
        mismatch += " channels (dataset " + std::to_string(ds.channels) + ", checkpoint " +
                    std::to_string(meta.input_channels) + ")";
    }
    if (ds.window_length != meta.window_length) {
        mismatch += " window_length (dataset " + std::to_string(ds.window_length) +
                    ", checkpoint " + std::to_string(meta.window_length) + ")";
    }
    if (!mismatch.empty()) throw std::runtime_error("dataset/checkpoint mismatch:" + mismatch);
    if (cfg.normalize) {
        const bpd::NormStats stats = bpd::compute_norm_stats(ds);
        bpd::apply_norm_stats(stats, ds);
    }

    unsigned columns = 0;
    if (zsig) columns |= bpd::kExportZSig;
    if (zred) columns |= bpd::kExportZRed;
    if (enc) columns |= bpd::kExportEnc;
    if (columns == 0) columns = bpd::kExportZSig;

    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + out_file + "'");
    bpd::export_features(nets, ds, out, columns);
    std::cout << "wrote features for " << ds.size() << " segments to " << out_file << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"behaviour pattern disentanglement toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    GlobalOpts g;
    app.add_option("--config", g.config_path, "run configuration file")->capture_default_str();
    app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
    app.add_option("--seed", g.seed_override, "seed override");
    app.add_option("--model", g.model_override, "model override (baseline|bpd)");

    auto* train = app.add_subcommand("train", "train one model and write a checkpoint");
    auto* loso = app.add_subcommand("loso", "leave-one-subject-out evaluation");
    auto* holdout = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string checkpoint_path;
    holdout->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string spec_path;
    synth->add_option("--spec", spec_path, "synthetic spec file (defaults when absent)");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    auto* exportf = app.add_subcommand("export-features", "export latent features as csv");
    std::string export_ckpt, export_out = "features.csv";
    bool f_zsig = false, f_zred = false, f_enc = false;
    exportf->add_option("--checkpoint", export_ckpt, "checkpoint file")->required();
    exportf->add_option("--features-out", export_out, "output csv path")->capture_default_str();
    exportf->add_flag("--zsig", f_zsig, "activity feature block");
    exportf->add_flag("--zred", f_zred, "redundant feature block");
    exportf->add_flag("--enc", f_enc, "encoder representation block");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(g);
        if (loso->parsed()) return run_protocol_command(g, bpd::SplitKind::loso, "loso");
        if (holdout->parsed()) return cmd_eval(g, checkpoint_path);
        if (synth->parsed()) return cmd_synth(g, spec_path);
        if (gradcheck->parsed()) return cmd_gradcheck();
        if (exportf->parsed())
            return cmd_export_features(g, export_ckpt, export_out, f_zsig, f_zred, f_enc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
