#pragma once

// Sliding-window segmentation, normalization, split planning, manifest
// loading and the synthetic benchmark generator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpd/tensor.hpp"

namespace bpd {

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Windowed multichannel segments. Labels are 1-based; label 0 is reserved
// for the null/transition class and never appears in a stored segment.
struct SegmentDataset {
    std::size_t channels = 0;
    std::size_t window_length = 0;
    std::vector<double> data; // (num_segments, channels, window_length), row-major
    std::vector<int> labels;
    std::vector<std::string> subjects;
    std::map<int, std::string> label_names;

    std::size_t size() const { return labels.size(); }

    std::size_t class_count() const {
        int k = 0;
        for (int l : labels) k = std::max(k, l);
        return static_cast<std::size_t>(k);
    }

    const double* segment(std::size_t i) const {
        return data.data() + i * channels * window_length;
    }

    void append_segment(const double* values, int label, const std::string& subject) {
        data.insert(data.end(), values, values + channels * window_length);
        labels.push_back(label);
        subjects.push_back(subject);
    }

    std::vector<std::string> subject_ids() const {
        std::vector<std::string> ids;
        for (const auto& s : subjects)
            if (std::find(ids.begin(), ids.end(), s) == ids.end()) ids.push_back(s);
        return ids;
    }

    SegmentDataset select(const std::vector<std::size_t>& indices) const {
        SegmentDataset out;
        out.channels = channels;
        out.window_length = window_length;
        out.label_names = label_names;
        for (std::size_t i : indices) out.append_segment(segment(i), labels[i], subjects[i]);
        return out;
    }

    SegmentDataset filter_subjects(const std::set<std::string>& keep) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < size(); ++i)
            if (keep.count(subjects[i])) idx.push_back(i);
        return select(idx);
    }

    template <class S>
    Tensor<S> batch(std::size_t start, std::size_t count) const {
        const std::size_t stride = channels * window_length;
        Tensor<S> t = Tensor<S>::zeros({count, channels, window_length});
        for (std::size_t i = 0; i < count * stride; ++i)
            t.values()[i] = static_cast<S>(data[start * stride + i]);
        return t;
    }

    template <class S>
    Tensor<S> gather(const std::vector<std::size_t>& indices) const {
        const std::size_t stride = channels * window_length;
        Tensor<S> t = Tensor<S>::zeros({indices.size(), channels, window_length});
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t j = 0; j < stride; ++j)
                t.values()[i * stride + j] = static_cast<S>(data[indices[i] * stride + j]);
        return t;
    }
};

inline std::size_t window_stride(std::size_t window, double overlap_fraction) {
    const auto stride = static_cast<std::size_t>(
        std::llround(static_cast<double>(window) * (1.0 - overlap_fraction)));
    return std::max<std::size_t>(stride, 1);
}

// Segments one subject's stream. Window label is the per-sample majority
// (ties to the lowest label); windows whose majority is null_label are
// dropped. No window ever spans two subjects because callers segment each
// subject's stream separately.
inline void segment_stream(const std::vector<double>& raw, std::size_t channels,
                           const std::vector<int>& labels_per_sample, std::size_t window,
                           double overlap_fraction, const std::string& subject,
                           SegmentDataset& out, int null_label = 0) {
    if (channels == 0 || raw.size() % channels != 0) {
        throw DataError("segment_stream: raw size " + std::to_string(raw.size()) +
                        " not divisible by " + std::to_string(channels) + " channels");
    }
    const std::size_t total = raw.size() / channels;
    if (labels_per_sample.size() != total) {
        throw DataError("segment_stream: " + std::to_string(labels_per_sample.size()) +
                        " labels for " + std::to_string(total) + " samples");
    }
    if (total < window) {
        throw DataError("segment_stream: stream of " + std::to_string(total) +
                        " samples shorter than window " + std::to_string(window));
    }
    if (overlap_fraction < 0.0 || overlap_fraction >= 1.0) {
        throw DataError("segment_stream: overlap must be in [0,1)");
    }
    if (out.channels == 0) {
        out.channels = channels;
        out.window_length = window;
    } else if (out.channels != channels || out.window_length != window) {
        throw DataError("segment_stream: dataset geometry mismatch");
    }

    const std::size_t stride = window_stride(window, overlap_fraction);
    const std::size_t count = (total - window) / stride + 1;
    std::vector<double> seg(channels * window);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = w * stride;
        std::map<int, std::size_t> votes;
        for (std::size_t t = 0; t < window; ++t) ++votes[labels_per_sample[start + t]];
        int best = votes.begin()->first;
        for (const auto& [label, n] : votes)
            if (n > votes[best]) best = label;
        if (best == null_label) continue;
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t t = 0; t < window; ++t)
                seg[c * window + t] = raw[c * total + start + t];
        out.append_segment(seg.data(), best, subject);
    }
}

// Per-channel z-score statistics, computed on training-fold data only.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev; // floored at 1e-8
};

inline NormStats compute_norm_stats(const SegmentDataset& train) {
    NormStats s;
    s.mean.assign(train.channels, 0.0);
    s.stddev.assign(train.channels, 0.0);
    const std::size_t per_channel = train.size() * train.window_length;
    if (per_channel == 0) throw DataError("compute_norm_stats: empty dataset");
    for (std::size_t i = 0; i < train.size(); ++i)
        for (std::size_t c = 0; c < train.channels; ++c) {
            const double* row = train.segment(i) + c * train.window_length;
            for (std::size_t t = 0; t < train.window_length; ++t) s.mean[c] += row[t];
        }
    for (auto& m : s.mean) m /= static_cast<double>(per_channel);
    for (std::size_t i = 0; i < train.size(); ++i)
        for (std::size_t c = 0; c < train.channels; ++c) {
            const double* row = train.segment(i) + c * train.window_length;
            for (std::size_t t = 0; t < train.window_length; ++t) {
                const double d = row[t] - s.mean[c];
                s.stddev[c] += d * d;
            }
        }
    for (auto& v : s.stddev) v = std::max(std::sqrt(v / static_cast<double>(per_channel)), 1e-8);
    return s;
}

inline void apply_norm_stats(const NormStats& stats, SegmentDataset& ds) {
    if (stats.mean.size() != ds.channels) throw DataError("apply_norm_stats: channel mismatch");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double* seg = ds.data.data() + i * ds.channels * ds.window_length;
        for (std::size_t c = 0; c < ds.channels; ++c)
            for (std::size_t t = 0; t < ds.window_length; ++t) {
                double& v = seg[c * ds.window_length + t];
                v = (v - stats.mean[c]) / stats.stddev[c];
            }
    }
}

// ---------------------------------------------------------------------------
// Split planning
// ---------------------------------------------------------------------------

enum class SplitKind { loso, holdout };

struct SplitFold {
    std::set<std::string> train_subjects;
    std::set<std::string> test_subjects;
};

struct SplitPlan {
    SplitKind kind = SplitKind::loso;
    std::vector<SplitFold> folds;
};

inline SplitPlan plan_splits(const SegmentDataset& dataset, SplitKind kind,
                             const std::set<std::string>& holdout_test_subjects = {}) {
    const auto ids = dataset.subject_ids();
    if (ids.size() < 2) throw DataError("plan_splits: need at least 2 subjects");
    SplitPlan plan;
    plan.kind = kind;
    if (kind == SplitKind::loso) {
        for (const auto& test : ids) {
            SplitFold fold;
            fold.test_subjects.insert(test);
            for (const auto& s : ids)
                if (s != test) fold.train_subjects.insert(s);
            plan.folds.push_back(std::move(fold));
        }
    } else {
        SplitFold fold;
        for (const auto& s : holdout_test_subjects) {
            if (std::find(ids.begin(), ids.end(), s) == ids.end()) {
                throw DataError("plan_splits: unknown test subject '" + s + "'");
            }
            fold.test_subjects.insert(s);
        }
        if (fold.test_subjects.empty() || fold.test_subjects.size() == ids.size()) {
            throw DataError("plan_splits: holdout test set must be a proper non-empty subset");
        }
        for (const auto& s : ids)
            if (!fold.test_subjects.count(s)) fold.train_subjects.insert(s);
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark
// ---------------------------------------------------------------------------

// Each segment is a class waveform plus a per-subject nuisance (amplitude
// scaling, baseline offset, frequency jitter held fixed within the subject)
// plus white noise.
struct SynthSpec {
    std::size_t class_count = 4;
    std::size_t subject_count = 8;
    std::size_t channels = 3;
    std::size_t window_length = 48;
    std::size_t segments_per_subject_per_class = 10;
    double base_frequency = 1.0;      // cycles per window for class 1
    double frequency_step = 1.0;      // added per class
    double nuisance_amplitude = 0.6;  // stddev of per-subject amplitude scale
    double nuisance_offset = 0.8;     // stddev of per-subject baseline offset
    double nuisance_frequency = 0.15; // stddev of per-subject frequency jitter
    double noise_std = 0.1;
    unsigned seed = 7;

    void validate() const {
        if (class_count < 2 || subject_count < 2 || channels == 0 || window_length == 0 ||
            segments_per_subject_per_class == 0) {
            throw DataError("SynthSpec: all counts must be positive (and K, S >= 2)");
        }
    }
};

inline SegmentDataset generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    std::mt19937 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * M_PI);

    struct Nuisance {
        double amplitude, offset, freq_jitter;
    };
    std::vector<Nuisance> nuisance(spec.subject_count);
    for (auto& nu : nuisance) {
        nu.amplitude = 1.0 + spec.nuisance_amplitude * gauss(rng);
        nu.offset = spec.nuisance_offset * gauss(rng);
        nu.freq_jitter = spec.nuisance_frequency * gauss(rng);
    }

    SegmentDataset ds;
    ds.channels = spec.channels;
    ds.window_length = spec.window_length;
    for (std::size_t k = 1; k <= spec.class_count; ++k)
        ds.label_names[static_cast<int>(k)] = "class" + std::to_string(k);

    std::vector<double> seg(spec.channels * spec.window_length);
    for (std::size_t s = 0; s < spec.subject_count; ++s) {
        const std::string subject = "s" + std::to_string(s + 1);
        const Nuisance& nu = nuisance[s];
        for (std::size_t k = 0; k < spec.class_count; ++k) {
            const double freq =
                (spec.base_frequency + spec.frequency_step * static_cast<double>(k)) *
                (1.0 + nu.freq_jitter);
            for (std::size_t r = 0; r < spec.segments_per_subject_per_class; ++r) {
                const double phase = uphase(rng);
                for (std::size_t c = 0; c < spec.channels; ++c) {
                    const double channel_shift =
                        2.0 * M_PI * static_cast<double>(c) / static_cast<double>(spec.channels);
                    for (std::size_t t = 0; t < spec.window_length; ++t) {
                        const double arg = 2.0 * M_PI * freq * static_cast<double>(t) /
                                               static_cast<double>(spec.window_length) +
                                           phase + channel_shift;
                        // second harmonic gives each class a distinct shape
                        const double wave =
                            std::sin(arg) + 0.3 * std::sin(2.0 * arg + 0.5 * static_cast<double>(k));
                        seg[c * spec.window_length + t] =
                            nu.amplitude * wave + nu.offset + spec.noise_std * gauss(rng);
                    }
                }
                ds.append_segment(seg.data(), static_cast<int>(k) + 1, subject);
            }
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Manifest and sensor file loading
// ---------------------------------------------------------------------------

struct DatasetManifest {
    std::string name;
    double sampling_rate = 0.0;
    std::size_t channel_count = 0;
    std::map<int, int> label_map; // external code -> internal label in [1,K]
    std::map<int, std::string> label_names;
    int null_code = 0;
    std::vector<std::pair<std::string, std::string>> subject_files; // id -> path
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_fields(const std::string& line, bool comma) {
    std::vector<std::string> fields;
    if (comma) {
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                fields.push_back(trim(cur));
                cur.clear();
            } else {
                cur += ch;
            }
        }
        fields.push_back(trim(cur));
    } else {
        std::istringstream is(line);
        std::string tok;
        while (is >> tok) fields.push_back(tok);
    }
    return fields;
}

inline bool parse_missing_or_value(const std::string& field, double& out) {
    if (field.empty() || field == "NaN" || field == "nan" || field == "NA") return false;
    out = std::stod(field);
    return std::isfinite(out);
}

} // namespace detail

inline DatasetManifest parse_manifest(std::istream& in, const std::string& origin) {
    DatasetManifest m;
    std::string line;
    bool in_subjects = false;
    std::size_t lineno = 0;
    int next_internal = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line == "[subjects]") {
            in_subjects = true;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (in_subjects) {
            m.subject_files.emplace_back(key, value);
        } else if (key == "name") {
            m.name = value;
        } else if (key == "sampling_rate") {
            m.sampling_rate = std::stod(value);
        } else if (key == "channels") {
            m.channel_count = static_cast<std::size_t>(std::stoul(value));
        } else if (key == "null_label") {
            m.null_code = std::stoi(value);
        } else if (key == "labels") {
            // comma-separated code=name pairs, internal labels assigned in order
            std::istringstream is(value);
            std::string pair;
            while (std::getline(is, pair, ',')) {
                pair = detail::trim(pair);
                const auto p = pair.find('=');
                if (p == std::string::npos) {
                    throw DataError(origin + ":" + std::to_string(lineno) +
                                    ": label entry '" + pair + "' is not code=name");
                }
                const int code = std::stoi(detail::trim(pair.substr(0, p)));
                m.label_map[code] = next_internal;
                m.label_names[next_internal] = detail::trim(pair.substr(p + 1));
                ++next_internal;
            }
        } else {
            throw DataError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (m.channel_count == 0) throw DataError(origin + ": missing channels key");
    if (m.label_map.empty()) throw DataError(origin + ": missing labels key");
    if (m.subject_files.empty()) throw DataError(origin + ": no [subjects] section entries");
    return m;
}

// One sample per row: timestamp, channel_1..channel_C, label_code.
// Delimiter (comma vs whitespace) is autodetected per file. Missing cells
// are forward-filled; leading gaps are back-filled from the first valid
// sample of the channel.
inline void parse_sensor_file(std::istream& in, const std::string& origin, std::size_t channels,
                              std::vector<double>& raw, std::vector<int>& label_codes) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::vector<double>> cols(channels);
    std::vector<std::vector<bool>> present(channels);
    bool comma = false, delim_known = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!delim_known) {
            comma = t.find(',') != std::string::npos;
            delim_known = true;
        }
        const auto fields = detail::split_fields(t, comma);
        if (fields.size() != channels + 2) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(channels + 2) + " columns, got " +
                            std::to_string(fields.size()));
        }
        try {
            for (std::size_t c = 0; c < channels; ++c) {
                double v = 0.0;
                const bool ok = detail::parse_missing_or_value(fields[c + 1], v);
                cols[c].push_back(ok ? v : 0.0);
                present[c].push_back(ok);
            }
            label_codes.push_back(std::stoi(fields.back()));
        } catch (const std::invalid_argument&) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": unparseable numeric field");
        }
    }
    const std::size_t total = label_codes.size();
    if (total == 0) throw DataError(origin + ": no samples");

    for (std::size_t c = 0; c < channels; ++c) {
        // forward fill, then back-fill the leading gap
        bool have = false;
        double last = 0.0;
        for (std::size_t t = 0; t < total; ++t) {
            if (present[c][t]) {
                last = cols[c][t];
                have = true;
            } else if (have) {
                cols[c][t] = last;
            }
        }
        if (!have) throw DataError(origin + ": channel " + std::to_string(c + 1) + " has no data");
        std::size_t first = 0;
        while (!present[c][first]) ++first;
        for (std::size_t t = 0; t < first; ++t) cols[c][t] = cols[c][first];
    }

    raw.clear();
    raw.reserve(channels * total);
    for (std::size_t c = 0; c < channels; ++c)
        raw.insert(raw.end(), cols[c].begin(), cols[c].end());
}

inline std::string dirname_of(const std::string& path) {
    const auto pos = path.find_last_of('/');
    return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

struct LoadedDataset {
    DatasetManifest manifest;
    SegmentDataset dataset;
};

inline LoadedDataset load_manifest(const std::string& path, std::size_t window,
                                   double overlap_fraction) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path + "'");
    LoadedDataset out;
    out.manifest = parse_manifest(in, path);
    out.dataset.label_names = out.manifest.label_names;
    const std::string base = dirname_of(path);

    for (const auto& [subject, rel] : out.manifest.subject_files) {
        const std::string file = rel.front() == '/' ? rel : base + "/" + rel;
        std::ifstream fin(file);
        if (!fin) throw DataError("cannot open sensor file '" + file + "'");
        std::vector<double> raw;
        std::vector<int> codes;
        parse_sensor_file(fin, file, out.manifest.channel_count, raw, codes);

        std::vector<int> labels(codes.size());
        for (std::size_t i = 0; i < codes.size(); ++i) {
            if (codes[i] == out.manifest.null_code) {
                labels[i] = 0;
            } else {
                const auto it = out.manifest.label_map.find(codes[i]);
                if (it == out.manifest.label_map.end()) {
                    throw DataError(file + ": sample " + std::to_string(i + 1) +
                                    ": label code " + std::to_string(codes[i]) +
                                    " absent from label map");
                }
                labels[i] = it->second;
            }
        }
        segment_stream(raw, out.manifest.channel_count, labels, window, overlap_fraction, subject,
                       out.dataset);
    }
    return out;
}

} // namespace bpd
