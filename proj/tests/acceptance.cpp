// Release gate: nine checks, one pass/fail line each, nonzero exit on any
// failure. Runtime limits are asserted where the check is time-boxed.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bpd/config.hpp"
#include "bpd/gradcheck_suite.hpp"
#include "bpd/protocol.hpp"

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int number, const char* name, bool passed, const std::string& detail) {
    std::printf("criterion %d %-28s %s  %s\n", number, name, passed ? "PASS" : "FAIL",
                detail.c_str());
    if (!passed) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    char buf[256];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. finite-difference audit of every primitive and loss composite
// ---------------------------------------------------------------------------
void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string worst_name;
    double worst = 0.0;
    for (const auto& r : bpd::run_gradcheck_suite(5, 1e-3)) {
        ok = ok && r.passed;
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_name = r.name;
        }
    }
    const double dt = seconds_since(t0);
    ok = ok && dt < 60.0;
    report(1, "gradient-suite", ok,
           fmt("worst %.2e (%s), %.1fs (limit 60s)", worst, worst_name.c_str(), dt));
}

// ---------------------------------------------------------------------------
// 2. dependency-bound estimator against the closed-form Gaussian MI
// ---------------------------------------------------------------------------
double train_mi_estimate(double rho, unsigned seed) {
    using T = bpd::Tensor<float>;
    const std::size_t n = 10000;
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<float> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = gauss(rng);
        const double y = rho * x + std::sqrt(1.0 - rho * rho) * gauss(rng);
        xs[i] = static_cast<float>(x);
        ys[i] = static_cast<float>(y);
    }

    bpd::MiNetwork<float> net(1, rng);
    bpd::Adam<float> opt(net.params(), 1e-3);
    const std::size_t batch = 500;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < 30; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start + batch <= n; start += batch) {
            T zx = T::zeros({batch, 1});
            T zy = T::zeros({batch, 1});
            for (std::size_t i = 0; i < batch; ++i) {
                zx.values()[i] = xs[order[start + i]];
                zy.values()[i] = ys[order[start + i]];
            }
            opt.zero_grad();
            bpd::Tape<float> tape;
            T bound = bpd::mine_loss(net, zx, zy, bpd::shuffle_permutation(batch, rng));
            tape.backward(bound);
            opt.step_ascend();
        }
    }

    // estimate on the full sample, averaged over several marginal shuffles
    T zx = T::zeros({n, 1});
    T zy = T::zeros({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
        zx.values()[i] = xs[i];
        zy.values()[i] = ys[i];
    }
    double acc = 0.0;
    const int reps = 10;
    for (int r = 0; r < reps; ++r) {
        acc += static_cast<double>(
            bpd::mine_loss(net, zx, zy, bpd::shuffle_permutation(n, rng)).item());
    }
    return acc / reps;
}

void criterion_mine_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const double corr = train_mi_estimate(0.8, 42);
    const double indep = train_mi_estimate(0.0, 43);
    const double truth = -0.5 * std::log(1.0 - 0.8 * 0.8);
    const double dt = seconds_since(t0);
    const bool ok =
        std::abs(corr - truth) <= 0.10 && std::abs(indep) <= 0.05 && dt < 180.0;
    report(2, "mi-estimator-oracle", ok,
           fmt("rho=0.8: %.4f (truth %.4f +-0.10), rho=0: %.4f (+-0.05), %.1fs (limit 180s)",
               corr, truth, indep, dt));
}

// ---------------------------------------------------------------------------
// 3. per-phase parameter isolation over 10 consecutive steps
// ---------------------------------------------------------------------------
template <class S>
std::uint64_t hash_params(const std::vector<bpd::Tensor<S>*>& params) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto* p : params) {
        for (S v : p->values()) {
            unsigned char bytes[sizeof(S)];
            std::memcpy(bytes, &v, sizeof(S));
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 1099511628211ull;
            }
        }
    }
    return h;
}

void criterion_phase_isolation() {
    const auto t0 = std::chrono::steady_clock::now();
    bpd::SynthSpec spec;
    spec.class_count = 3;
    spec.subject_count = 3;
    spec.channels = 2;
    spec.segments_per_subject_per_class = 4;
    bpd::SegmentDataset ds = bpd::generate_synthetic(spec);

    bpd::TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.latent_dim = 8;
    cfg.seed = 5;
    bpd::EncoderSpec espec{cfg.encoder, ds.channels, ds.window_length, cfg.resolved_latent_dim()};
    bpd::BpdNetworks<float> nets(espec, ds.class_count(), cfg.dropout_rate, cfg.seed);
    bpd::BpdOptimizers<float> opts(nets, cfg.lr);
    std::mt19937 rng(cfg.seed);

    auto groups = [&]() {
        return std::array<std::uint64_t, 7>{
            hash_params(nets.encoder.params()), hash_params(nets.dis_sig.params()),
            hash_params(nets.dis_red.params()), hash_params(nets.cls_sig.params()),
            hash_params(nets.cls_red.params()), hash_params(nets.recon.params()),
            hash_params(nets.mi_net.params())};
    };
    // per phase: which of E, D, D', C, C', R, M may change
    const std::array<std::array<bool, 7>, 4> expected{{
        {true, true, true, true, true, false, false},
        {true, false, true, false, false, false, false},
        {false, true, true, false, false, false, true},
        {false, true, true, false, false, true, false},
    }};

    bool ok = true;
    for (int step = 0; step < 10; ++step) {
        const std::size_t start = (static_cast<std::size_t>(step) * 8) % (ds.size() - 8);
        bpd::Tensor<float> batch = ds.batch<float>(start, 8);
        std::vector<int> labels(ds.labels.begin() + static_cast<long>(start),
                                ds.labels.begin() + static_cast<long>(start) + 8);
        auto before = groups();
        auto hook = [&](int phase) {
            const auto after = groups();
            for (std::size_t g = 0; g < 7; ++g) {
                if ((after[g] != before[g]) !=
                    expected[static_cast<std::size_t>(phase - 1)][g]) {
                    ok = false;
                }
            }
            before = after;
        };
        bpd::train_step(nets, batch, labels, cfg, opts, rng, hook);
    }
    const double dt = seconds_since(t0);
    ok = ok && dt < 30.0;
    report(3, "phase-isolation", ok, fmt("10 steps x 4 phases, %.1fs (limit 30s)", dt));
}

// ---------------------------------------------------------------------------
// 4. shipped synthetic regression: disentangled vs plain encoder
// ---------------------------------------------------------------------------
void criterion_synthetic_regression() {
    const auto t0 = std::chrono::steady_clock::now();
    bpd::SynthSpec spec; // shipped benchmark: 4 classes, 8 subjects, seed 7
    spec.segments_per_subject_per_class = 20;
    bpd::SegmentDataset ds = bpd::generate_synthetic(spec);

    bpd::TrainConfig cfg;
    cfg.lr = 0.001;
    cfg.batch_size = 8;
    cfg.max_epoch = 50;
    cfg.convergence_patience = 50; // fixed-length run for pinned references
    cfg.latent_dim = 32;
    cfg.dropout_rate = 0.9;
    cfg.mine_mode = bpd::MineMode::minimax;
    cfg.seed = 1;

    bpd::ProtocolSettings settings;
    settings.train = cfg;
    settings.normalize = true;
    settings.config_hash = "regression";

    const bpd::SplitPlan plan = bpd::plan_splits(ds, bpd::SplitKind::loso);
    const bpd::MetricsReport bpd_report =
        bpd::run_protocol<float>(ds, plan, settings, bpd::ModelKind::bpd);
    const bpd::MetricsReport base_report =
        bpd::run_protocol<float>(ds, plan, settings, bpd::ModelKind::baseline_encoder);

    double mine_first = 0.0, mine_last = 0.0, ent_first = 0.0, ent_last = 0.0;
    for (const auto& fold : bpd_report.folds) {
        const bpd::DiagnosticSummary d = bpd::diagnostics(fold.epochs);
        mine_first += d.mine_first;
        mine_last += d.mine_last;
        ent_first += d.entropy_first;
        ent_last += d.entropy_last;
    }
    const double folds = static_cast<double>(bpd_report.folds.size());
    mine_first /= folds;
    mine_last /= folds;
    ent_first /= folds;
    ent_last /= folds;

    const double dt = seconds_since(t0);
    // references computed once on the shipped seeds and pinned (loose
    // tolerances absorb cross-platform float drift)
    const bool pinned = std::abs(bpd_report.average_f1 - 0.8200) < 0.10 &&
                        std::abs(base_report.average_f1 - 0.8042) < 0.10 &&
                        std::abs(ent_first - 0.943) < 0.20 && std::abs(ent_last - 1.318) < 0.20 &&
                        std::abs(mine_first - 0.498) < 0.30 && std::abs(mine_last) < 0.40;
    const bool ok = bpd_report.average_f1 >= base_report.average_f1 && mine_last < mine_first &&
                    ent_last > ent_first && pinned && dt < 900.0;
    report(4, "synthetic-regression", ok,
           fmt("avg F1 %.4f vs baseline %.4f, mine %.3f->%.3f, entropy %.3f->%.3f, %.0fs "
               "(limit 900s)",
               bpd_report.average_f1, base_report.average_f1, mine_first, mine_last, ent_first,
               ent_last, dt));
}

// ---------------------------------------------------------------------------
// 5. initialization sanity on balanced data
// ---------------------------------------------------------------------------
void criterion_init_sanity() {
    bpd::SynthSpec spec;
    spec.subject_count = 4;
    spec.segments_per_subject_per_class = 4;
    bpd::SegmentDataset ds = bpd::generate_synthetic(spec);

    bpd::TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.max_epoch = 3;
    cfg.latent_dim = 8;
    cfg.dropout_rate = 0.0; // keeps the initial logit variance small
    cfg.seed = 1;
    bpd::EncoderSpec espec{cfg.encoder, ds.channels, ds.window_length, cfg.resolved_latent_dim()};
    bpd::BpdNetworks<float> nets(espec, ds.class_count(), cfg.dropout_rate, cfg.seed);
    const bpd::FitResult fr = bpd::fit(nets, ds, cfg);

    const double k = static_cast<double>(ds.class_count());
    const double target = 2.0 * std::log(k);
    bool ok = std::abs(fr.epochs.front().ce - target) <= 0.15;
    for (const auto& log : fr.epochs) {
        ok = ok && log.ne >= -std::log(k) - 1e-9 && log.ne <= 0.0;
    }
    report(5, "init-sanity", ok,
           fmt("epoch-1 ce %.4f (target %.4f +-0.15), ne within [-lnK, 0] over %zu epochs",
               fr.epochs.front().ce, target, fr.epochs.size()));
}

// ---------------------------------------------------------------------------
// 6. segmentation arithmetic on randomized stream geometries
// ---------------------------------------------------------------------------
void criterion_segmentation() {
    std::mt19937 rng(99);
    std::uniform_int_distribution<std::size_t> wdist(8, 200);
    std::uniform_real_distribution<double> odist(0.0, 0.9);
    bool ok = true;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t window = wdist(rng);
        // first case exercises the T == window boundary
        const std::size_t total =
            trial == 0 ? window
                       : window + std::uniform_int_distribution<std::size_t>(0, 5000)(rng);
        const double overlap = odist(rng);
        std::vector<double> raw(total, 0.0);
        std::vector<int> labels(total, 1);
        bpd::SegmentDataset ds;
        bpd::segment_stream(raw, 1, labels, window, overlap, "s", ds);
        const std::size_t stride = bpd::window_stride(window, overlap);
        const std::size_t expected = (total - window) / stride + 1;
        if (ds.size() != expected) ok = false;
    }
    report(6, "segmentation-arithmetic", ok, "20 randomized (T, window, overlap) cases");
}

// ---------------------------------------------------------------------------
// 7. f1 scoring against a brute-force oracle
// ---------------------------------------------------------------------------
void criterion_metric_oracle() {
    std::mt19937 rng(2025);
    std::uniform_int_distribution<int> kdist(2, 8);
    std::uniform_int_distribution<std::int64_t> cdist(0, 25);
    bool ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = static_cast<std::size_t>(kdist(rng));
        bpd::ConfusionMatrix cm(k);
        std::int64_t total = 0;
        for (auto& c : cm.counts) {
            c = cdist(rng);
            total += c;
        }
        if (total == 0) cm.counts[0] = 1;

        const auto got = bpd::classwise_f1(cm);
        double macro_acc = 0.0;
        std::size_t macro_n = 0;
        for (std::size_t c = 0; c < k; ++c) {
            double tp = 0, fp = 0, fn = 0;
            for (std::size_t j = 0; j < k; ++j) {
                if (j == c) {
                    tp = static_cast<double>(cm.at(c, c));
                } else {
                    fn += static_cast<double>(cm.at(c, j));
                    fp += static_cast<double>(cm.at(j, c));
                }
            }
            double want;
            if (tp + fp + fn == 0) {
                if (!std::isnan(got[c])) ok = false;
                continue;
            } else if (tp == 0) {
                want = 0.0;
            } else {
                const double precision = tp / (tp + fp);
                const double recall = tp / (tp + fn);
                want = 2.0 * precision * recall / (precision + recall);
            }
            if (got[c] != want) ok = false;
            macro_acc += want;
            ++macro_n;
        }
        if (bpd::macro_f1(cm) != macro_acc / static_cast<double>(macro_n)) ok = false;
    }
    report(7, "metric-oracle", ok, "100 random confusion matrices, exact match");
}

// ---------------------------------------------------------------------------
// 8 and 9. command-level determinism and the manifest smoke path
// ---------------------------------------------------------------------------
int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(BPD_CLI_PATH) + " " + args + " > acc_stdout.txt 2> acc_stderr.txt";
    const int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void criterion_determinism() {
    const fs::path dir = "acceptance_scratch";
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "det.cfg");
        cfg << "[train]\nmax_epoch = 2\nbatch_size = 8\nlatent_dim = 8\nseed = 11\n"
            << "[data]\nsynth_classes = 3\nsynth_subjects = 3\nsynth_channels = 2\n"
            << "synth_window = 48\nsynth_segments = 4\n";
    }
    bool ok = run_cli("loso --config " + (dir / "det.cfg").string() + " --out " +
                      (dir / "det1").string()) == 0;
    ok = ok && run_cli("loso --config " + (dir / "det.cfg").string() + " --out " +
                       (dir / "det2").string()) == 0;
    // everything except the timestamped metadata file must be byte-identical
    for (const char* name : {"report.json", "report.txt", "epochs.jsonl", "config.resolved"}) {
        const std::string a = slurp(dir / "det1" / name);
        ok = ok && !a.empty() && a == slurp(dir / "det2" / name);
    }
    report(8, "cli-determinism", ok, "two loso runs, payload files byte-identical");
}

void criterion_manifest_smoke() {
    const fs::path dir = "acceptance_scratch/pamap2";
    fs::create_directories(dir);
    // PAMAP2-style columns: timestamp, channels, activity code; codes 4 and
    // 17 are mapped, 0 is the null class
    std::mt19937 rng(31);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int subject = 1; subject <= 2; ++subject) {
        std::ofstream f(dir / ("subject10" + std::to_string(subject) + ".dat"));
        for (int t = 0; t < 2000; ++t) {
            const int code = t < 200 ? 0 : (t < 1100 ? 4 : 17);
            const double base = code == 4 ? std::sin(0.3 * t) : std::cos(0.17 * t);
            f << t * 0.01;
            for (int c = 0; c < 3; ++c) f << ' ' << base + 0.3 * gauss(rng) + c;
            f << ' ' << code << '\n';
        }
    }
    {
        std::ofstream m(dir / "pamap2.manifest");
        m << "name = pamap2-subset\nsampling_rate = 100\nchannels = 3\nnull_label = 0\n"
          << "labels = 4=walking, 17=ironing\n[subjects]\n"
          << "subject101 = subject101.dat\nsubject102 = subject102.dat\n";
    }
    {
        std::ofstream cfg(dir / "smoke.cfg");
        cfg << "[train]\nmax_epoch = 2\nbatch_size = 8\nlatent_dim = 8\nseed = 4\n"
            << "[data]\nsource = manifest\nmanifest = " << (dir / "pamap2.manifest").string()
            << "\nwindow = 64\noverlap = 0.5\n";
    }
    bool ok = run_cli("loso --config " + (dir / "smoke.cfg").string() + " --out " +
                      (dir / "out").string()) == 0;
    const std::string table = slurp(dir / "out" / "report.txt");
    std::istringstream lines(table);
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(lines, line)) rows.push_back(line);
    // header, one row per subject, Avg.
    ok = ok && rows.size() == 4;
    ok = ok && rows[0].rfind("Subject", 0) == 0;
    ok = ok && rows[1].rfind("subject101", 0) == 0;
    ok = ok && rows[2].rfind("subject102", 0) == 0;
    ok = ok && rows[3].rfind("Avg.", 0) == 0;
    const std::string json = slurp(dir / "out" / "report.json");
    ok = ok && json.find("\"protocol\": \"loso\"") != std::string::npos &&
         json.find("subject101") != std::string::npos &&
         json.find("classwise_f1") != std::string::npos;
    report(9, "manifest-smoke", ok, "2-subject manifest, table-shaped report");
}

} // namespace

int main() {
    criterion_gradients();
    criterion_mine_oracle();
    criterion_phase_isolation();
    criterion_synthetic_regression();
    criterion_init_sanity();
    criterion_segmentation();
    criterion_metric_oracle();
    criterion_determinism();
    criterion_manifest_smoke();
    if (g_failures) {
        std::printf("%d criteria FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
