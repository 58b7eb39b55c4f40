#include "preictal/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "preictal/explain.hpp"
#include "preictal/filters.hpp"
#include "preictal/parallel.hpp"
#include "preictal/scalp_svg.hpp"
#include "preictal/segment_cache.hpp"
#include "preictal/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace preictal {

// ---- profiles ------------------------------------------------------------------

PipelineConfig default_config(const std::string& profile) {
    PipelineConfig c;
    c.profile = profile;
    if (profile == "helsinki") {
        // neonatal profile: 256 Hz recordings, 30 min preictal horizon
        c.signal.expected_fs = 256;
        c.signal.downsample = 1;
        c.timing = {1800.0, 3600.0, 1800.0, 5.0};
        c.training.lr = 4e-4;
        c.training.batch_size = 256;
        c.training.weight_decay = 5e-3;
        c.training.w_pos = 0.52;
        c.model.dropout_p = 0.3;
        c.model.se_reduction = 8;
    } else if (profile == "siena") {
        // 512 Hz recordings halved during preprocessing; 1 h preictal
        c.signal.expected_fs = 512;
        c.signal.downsample = 2;
        c.timing = {3600.0, 3600.0, 1800.0, 5.0};
        c.training.lr = 2e-3;
        c.training.batch_size = 128;
        c.training.weight_decay = 1e-4;
        c.training.w_pos = 0.51;
        c.model.dropout_p = 1e-4;
        c.model.se_reduction = 16;
    } else if (profile == "synthetic") {
        // desk-scale fixture: short recordings, quick training
        c.signal.expected_fs = 256;
        c.signal.downsample = 1;
        c.timing = {150.0, 300.0, 60.0, 5.0};
        c.training.lr = 1e-3;
        c.training.batch_size = 64;
        c.training.weight_decay = 1e-4;
        c.training.w_pos = 0.5;
        c.training.max_epochs = 60;
        c.training.early_stop_patience = 12;
        c.model.dropout_p = 0.1;
        c.model.se_reduction = 8;
        c.cv.trials = 1;
        c.explain.n_permutations = 40;
        c.finetune.max_epochs = 40;
    } else {
        throw ConfigError("profile: unknown profile '" + profile +
                          "' (expected helsinki, siena or synthetic)");
    }
    return c;
}

// ---- json <-> struct --------------------------------------------------------------

namespace {

struct FieldErrors {
    std::vector<std::string> items;
    void add(const std::string& path, const std::string& msg) { items.push_back(path + ": " + msg); }
    void raise_if_any() const {
        if (items.empty()) return;
        std::string joined;
        for (const auto& s : items) joined += (joined.empty() ? "" : "\n") + s;
        throw ConfigError(joined);
    }
};

class Reader {
public:
    Reader(const json& j, const std::string& prefix, FieldErrors& errs)
        : j_(j), prefix_(prefix), errs_(errs) {}

    template <typename T>
    void get(const char* key, T& out) {
        seen_.push_back(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            errs_.add(path(key), "cannot convert value " + j_.at(key).dump());
        }
    }

    void mark_seen(const char* key) { seen_.push_back(key); }

    bool has_object(const char* key) {
        seen_.push_back(key);
        if (!j_.contains(key)) return false;
        if (!j_.at(key).is_object()) {
            errs_.add(path(key), "expected an object");
            return false;
        }
        return true;
    }

    Reader child(const char* key) { return Reader(j_.at(key), path(key), errs_); }

    void finish() {
        if (!j_.is_object()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                errs_.add(path(it.key().c_str()), "unknown field");
    }

    std::string path(const char* key) const {
        return prefix_.empty() ? key : prefix_ + "." + key;
    }

    const json& raw() const { return j_; }

private:
    const json& j_;
    std::string prefix_;
    FieldErrors& errs_;
    std::vector<std::string> seen_;
};

void apply_json(PipelineConfig& c, const json& j, FieldErrors& errs) {
    Reader root(j, "", errs);
    std::string profile_ignored;
    root.get("profile", profile_ignored);  // consumed before defaults were built
    root.get("seed", c.seed);

    if (root.has_object("paths")) {
        Reader r = root.child("paths");
        r.get("raw_dir", c.paths.raw_dir);
        r.get("cache_dir", c.paths.cache_dir);
        r.get("runs_dir", c.paths.runs_dir);
        r.finish();
    }
    if (root.has_object("signal")) {
        Reader r = root.child("signal");
        r.get("bandpass_lo", c.signal.bandpass_lo);
        r.get("bandpass_hi", c.signal.bandpass_hi);
        r.get("notch_hz", c.signal.notch_hz);
        r.get("notch_halfwidth_hz", c.signal.notch_halfwidth_hz);
        r.get("filter_order", c.signal.filter_order);
        r.get("downsample", c.signal.downsample);
        r.get("expected_fs", c.signal.expected_fs);
        r.get("min_consensus_overlap_s", c.signal.min_consensus_overlap_s);
        r.finish();
    }
    if (root.has_object("timing")) {
        Reader r = root.child("timing");
        r.get("preictal_s", c.timing.preictal_s);
        r.get("interictal_gap_s", c.timing.interictal_gap_s);
        r.get("postictal_s", c.timing.postictal_s);
        r.get("window_s", c.timing.window_s);
        r.finish();
    }
    root.mark_seen("electrode_aliases");
    if (j.contains("electrode_aliases")) {
        if (j.at("electrode_aliases").is_object()) {
            c.electrode_aliases.clear();
            for (auto it = j.at("electrode_aliases").begin(); it != j.at("electrode_aliases").end(); ++it)
                c.electrode_aliases[it.key()] = it.value().get<std::string>();
        } else {
            errs.add("electrode_aliases", "expected an object of {recording_label: montage_label}");
        }
    }
    if (root.has_object("montage")) {
        Reader r = root.child("montage");
        r.mark_seen("pairs");
        if (r.raw().contains("pairs")) {
            const json& pairs = r.raw().at("pairs");
            if (!pairs.is_array()) {
                errs.add("montage.pairs", "expected an array of [anode, cathode] pairs");
            } else {
                c.montage.eeg_pairs.clear();
                for (const auto& p : pairs) {
                    if (!p.is_array() || p.size() != 2) {
                        errs.add("montage.pairs", "each entry must be [anode, cathode]");
                        break;
                    }
                    c.montage.eeg_pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
                }
            }
        }
        std::string ecg = c.montage.ecg_label;
        r.get("ecg_label", ecg);
        c.montage.ecg_label = ecg;
        r.finish();
    }
    if (root.has_object("mfcc")) {
        Reader r = root.child("mfcc");
        r.get("frame_len", c.mfcc.frame_len);
        r.get("hop", c.mfcc.hop);
        r.get("n_mels", c.mfcc.n_mels);
        r.get("fmin", c.mfcc.fmin);
        r.get("fmax", c.mfcc.fmax);
        r.get("n_mfcc", c.mfcc.n_mfcc);
        r.get("log_floor", c.mfcc.log_floor);
        r.finish();
    }
    if (root.has_object("model")) {
        Reader r = root.child("model");
        std::vector<int> channels(c.model.conv_channels.begin(), c.model.conv_channels.end());
        r.get("conv_channels", channels);
        if (channels.size() == 3)
            std::copy(channels.begin(), channels.end(), c.model.conv_channels.begin());
        else
            errs.add("model.conv_channels", "expected exactly 3 values");
        std::vector<int> kernel{c.model.kernel_h, c.model.kernel_w};
        r.get("kernel", kernel);
        if (kernel.size() == 2) {
            c.model.kernel_h = kernel[0];
            c.model.kernel_w = kernel[1];
        } else {
            errs.add("model.kernel", "expected [kh, kw]");
        }
        r.get("dense_units", c.model.dense_units);
        r.get("se_reduction", c.model.se_reduction);
        r.get("use_attention", c.model.use_attention);
        r.get("dropout", c.model.dropout_p);
        r.finish();
    }
    if (root.has_object("training")) {
        Reader r = root.child("training");
        r.get("lr", c.training.lr);
        r.get("batch_size", c.training.batch_size);
        r.get("weight_decay", c.training.weight_decay);
        r.get("w_pos", c.training.w_pos);
        if (r.has_object("scheduler")) {
            Reader s = r.child("scheduler");
            s.get("patience", c.training.scheduler.patience);
            s.get("factor", c.training.scheduler.factor);
            s.get("min_lr", c.training.scheduler.min_lr);
            s.get("improve_threshold", c.training.scheduler.improve_threshold);
            s.finish();
        }
        r.get("max_epochs", c.training.max_epochs);
        r.get("early_stop_patience", c.training.early_stop_patience);
        r.get("val_fraction", c.training.val_fraction);
        r.finish();
    }
    if (root.has_object("cv")) {
        Reader r = root.child("cv");
        r.get("folds", c.cv.folds);
        r.get("trials", c.cv.trials);
        r.finish();
    }
    if (root.has_object("finetune")) {
        Reader r = root.child("finetune");
        r.get("n_per_class", c.finetune.n_per_class);
        r.get("max_epochs", c.finetune.max_epochs);
        r.finish();
    }
    if (root.has_object("explain")) {
        Reader r = root.child("explain");
        r.get("n_permutations", c.explain.n_permutations);
        r.get("n_test_per_class", c.explain.n_test_per_class);
        r.get("train_fraction", c.explain.train_fraction);
        r.get("n_importance_tensors", c.explain.n_importance_tensors);
        r.finish();
    }
    if (root.has_object("synth")) {
        Reader r = root.child("synth");
        r.get("n_subjects", c.synth.n_subjects);
        r.get("duration_s", c.synth.duration_s);
        r.get("seizure_onset_s", c.synth.seizure_onset_s);
        r.get("seizure_duration_s", c.synth.seizure_duration_s);
        r.get("background_scale", c.synth.background_scale);
        r.get("burst_gain", c.synth.burst_gain);
        r.finish();
    }
    root.finish();
}

json override_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);  // bare strings allowed without quotes
    }
}

void apply_override(json& j, const std::string& assignment, FieldErrors& errs) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        errs.add("--set", "expected key=value, got '" + assignment + "'");
        return;
    }
    const std::string key = assignment.substr(0, eq);
    json* cur = &j;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) {
            errs.add("--set", "empty path component in '" + key + "'");
            return;
        }
        if (dot == std::string::npos) {
            (*cur)[part] = override_value(assignment.substr(eq + 1));
            return;
        }
        cur = &(*cur)[part];
        start = dot + 1;
    }
}

}  // namespace

void validate_config(const PipelineConfig& c) {
    FieldErrors errs;
    if (c.profile != "helsinki" && c.profile != "siena" && c.profile != "synthetic")
        errs.add("profile", "unknown profile '" + c.profile + "'");

    const auto& s = c.signal;
    if (s.filter_order < 1) errs.add("signal.filter_order", "must be >= 1");
    if (s.downsample < 1) errs.add("signal.downsample", "must be >= 1");
    if (s.expected_fs < 2) errs.add("signal.expected_fs", "must be >= 2");
    if (s.downsample >= 1 && s.expected_fs % s.downsample != 0)
        errs.add("signal.downsample", "must divide expected_fs evenly");
    if (!(0.0 < s.bandpass_lo && s.bandpass_lo < s.bandpass_hi))
        errs.add("signal.bandpass_lo", "need 0 < lo < hi");
    if (!(s.bandpass_hi < s.expected_fs / 2.0))
        errs.add("signal.bandpass_hi", "must be below the Nyquist frequency of expected_fs");
    if (!(0.0 < s.notch_hz && s.notch_hz < s.expected_fs / 2.0))
        errs.add("signal.notch_hz", "must lie in (0, expected_fs/2)");
    if (s.notch_halfwidth_hz <= 0.0) errs.add("signal.notch_halfwidth_hz", "must be positive");
    if (s.min_consensus_overlap_s < 0.0) errs.add("signal.min_consensus_overlap_s", "must be >= 0");

    if (c.timing.preictal_s <= 0) errs.add("timing.preictal_s", "must be positive");
    if (c.timing.interictal_gap_s <= 0) errs.add("timing.interictal_gap_s", "must be positive");
    if (c.timing.postictal_s <= 0) errs.add("timing.postictal_s", "must be positive");
    if (c.timing.window_s <= 0) errs.add("timing.window_s", "must be positive");

    if (c.montage.eeg_pairs.empty()) errs.add("montage.pairs", "must list at least one pair");
    if (c.montage.ecg_label.empty()) errs.add("montage.ecg_label", "must not be empty");

    const int eff_fs = s.downsample >= 1 && s.expected_fs % std::max(1, s.downsample) == 0
                           ? s.expected_fs / std::max(1, s.downsample)
                           : s.expected_fs;
    const auto& m = c.mfcc;
    if (m.frame_len <= 0 || (m.frame_len & (m.frame_len - 1)) != 0)
        errs.add("mfcc.frame_len", "must be a power of two");
    if (m.hop <= 0 || m.hop > m.frame_len) errs.add("mfcc.hop", "need 0 < hop <= frame_len");
    if (m.n_mels < 1) errs.add("mfcc.n_mels", "must be >= 1");
    if (m.n_mfcc < 1 || m.n_mfcc > m.n_mels) errs.add("mfcc.n_mfcc", "need 1 <= n_mfcc <= n_mels");
    if (!(0.0 < m.fmin && m.fmin < m.fmax)) errs.add("mfcc.fmin", "need 0 < fmin < fmax");
    if (!(m.fmax < eff_fs / 2.0))
        errs.add("mfcc.fmax", "must be below the Nyquist frequency after downsampling (" +
                                  std::to_string(eff_fs / 2.0) + " Hz)");
    if (m.log_floor <= 0.0) errs.add("mfcc.log_floor", "must be positive");

    const auto& mo = c.model;
    if (!(mo.conv_channels[0] < mo.conv_channels[1] && mo.conv_channels[1] < mo.conv_channels[2]))
        errs.add("model.conv_channels", "must be strictly increasing");
    for (int ch : mo.conv_channels)
        if (ch < 1) errs.add("model.conv_channels", "channels must be positive");
    if (mo.kernel_h < 1 || mo.kernel_w < 1) errs.add("model.kernel", "kernel dims must be >= 1");
    if (mo.se_reduction < 1 || mo.conv_channels[2] % mo.se_reduction != 0)
        errs.add("model.se_reduction", "must divide conv_channels[2] (" +
                                           std::to_string(mo.conv_channels[2]) + ")");
    if (mo.dropout_p < 0.0 || mo.dropout_p >= 1.0) errs.add("model.dropout", "need 0 <= p < 1");
    if (mo.dense_units < 1) errs.add("model.dense_units", "must be >= 1");

    const auto& t = c.training;
    if (t.lr <= 0) errs.add("training.lr", "must be positive");
    if (t.batch_size < 2) errs.add("training.batch_size", "must be >= 2");
    if (t.weight_decay < 0) errs.add("training.weight_decay", "must be >= 0");
    if (!(t.w_pos > 0.0 && t.w_pos < 1.0)) errs.add("training.w_pos", "must be in (0,1)");
    if (!(t.scheduler.factor > 0.0 && t.scheduler.factor < 1.0))
        errs.add("training.scheduler.factor", "must be in (0,1)");
    if (t.scheduler.patience < 0) errs.add("training.scheduler.patience", "must be >= 0");
    if (t.scheduler.min_lr <= 0) errs.add("training.scheduler.min_lr", "must be positive");
    if (t.max_epochs < 1) errs.add("training.max_epochs", "must be >= 1");
    if (t.early_stop_patience < 1) errs.add("training.early_stop_patience", "must be >= 1");
    if (t.val_fraction < 0.0 || t.val_fraction >= 1.0)
        errs.add("training.val_fraction", "must be in [0,1)");

    if (c.cv.folds < 2) errs.add("cv.folds", "must be >= 2");
    if (c.cv.trials < 1) errs.add("cv.trials", "must be >= 1");
    if (c.finetune.n_per_class < 1) errs.add("finetune.n_per_class", "must be >= 1");
    if (c.finetune.max_epochs < 1) errs.add("finetune.max_epochs", "must be >= 1");
    if (c.explain.n_permutations < 1) errs.add("explain.n_permutations", "must be >= 1");
    if (c.explain.n_test_per_class < 1) errs.add("explain.n_test_per_class", "must be >= 1");
    if (c.explain.n_importance_tensors < 3)
        errs.add("explain.n_importance_tensors", "must be >= 3");
    if (c.explain.n_importance_tensors > c.explain.n_test_per_class)
        errs.add("explain.n_importance_tensors", "cannot exceed n_test_per_class");
    if (!(c.explain.train_fraction > 0.0 && c.explain.train_fraction < 1.0))
        errs.add("explain.train_fraction", "must be in (0,1)");
    if (c.synth.n_subjects < 1) errs.add("synth.n_subjects", "must be >= 1");
    if (c.synth.seizure_onset_s <= 0 || c.synth.seizure_duration_s <= 0 ||
        c.synth.seizure_onset_s + c.synth.seizure_duration_s > c.synth.duration_s)
        errs.add("synth.seizure_onset_s", "seizure must fit inside the recording duration");
    errs.raise_if_any();
}

PipelineConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides) {
    json j;
    try {
        j = json_text.empty() ? json::object()
                              : json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");

    FieldErrors errs;
    for (const auto& o : overrides) apply_override(j, o, errs);
    errs.raise_if_any();

    const std::string profile = j.value("profile", std::string("synthetic"));
    PipelineConfig cfg = default_config(profile);
    apply_json(cfg, j, errs);
    errs.raise_if_any();
    validate_config(cfg);
    return cfg;
}

PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config(text, overrides);
}

std::string config_to_json(const PipelineConfig& c) {
    json j;
    j["profile"] = c.profile;
    j["seed"] = c.seed;
    j["paths"] = {{"raw_dir", c.paths.raw_dir},
                  {"cache_dir", c.paths.cache_dir},
                  {"runs_dir", c.paths.runs_dir}};
    j["signal"] = {{"bandpass_lo", c.signal.bandpass_lo},
                   {"bandpass_hi", c.signal.bandpass_hi},
                   {"notch_hz", c.signal.notch_hz},
                   {"notch_halfwidth_hz", c.signal.notch_halfwidth_hz},
                   {"filter_order", c.signal.filter_order},
                   {"downsample", c.signal.downsample},
                   {"expected_fs", c.signal.expected_fs},
                   {"min_consensus_overlap_s", c.signal.min_consensus_overlap_s}};
    j["timing"] = {{"preictal_s", c.timing.preictal_s},
                   {"interictal_gap_s", c.timing.interictal_gap_s},
                   {"postictal_s", c.timing.postictal_s},
                   {"window_s", c.timing.window_s}};
    j["electrode_aliases"] = c.electrode_aliases;
    json pairs = json::array();
    for (const auto& [a, b] : c.montage.eeg_pairs) pairs.push_back({a, b});
    j["montage"] = {{"pairs", pairs}, {"ecg_label", c.montage.ecg_label}};
    j["mfcc"] = {{"frame_len", c.mfcc.frame_len}, {"hop", c.mfcc.hop},
                 {"n_mels", c.mfcc.n_mels},       {"fmin", c.mfcc.fmin},
                 {"fmax", c.mfcc.fmax},           {"n_mfcc", c.mfcc.n_mfcc},
                 {"log_floor", c.mfcc.log_floor}};
    j["model"] = {{"conv_channels", c.model.conv_channels},
                  {"kernel", {c.model.kernel_h, c.model.kernel_w}},
                  {"dense_units", c.model.dense_units},
                  {"se_reduction", c.model.se_reduction},
                  {"use_attention", c.model.use_attention},
                  {"dropout", c.model.dropout_p}};
    j["training"] = {{"lr", c.training.lr},
                     {"batch_size", c.training.batch_size},
                     {"weight_decay", c.training.weight_decay},
                     {"w_pos", c.training.w_pos},
                     {"scheduler",
                      {{"patience", c.training.scheduler.patience},
                       {"factor", c.training.scheduler.factor},
                       {"min_lr", c.training.scheduler.min_lr},
                       {"improve_threshold", c.training.scheduler.improve_threshold}}},
                     {"max_epochs", c.training.max_epochs},
                     {"early_stop_patience", c.training.early_stop_patience},
                     {"val_fraction", c.training.val_fraction}};
    j["cv"] = {{"folds", c.cv.folds}, {"trials", c.cv.trials}};
    j["finetune"] = {{"n_per_class", c.finetune.n_per_class},
                     {"max_epochs", c.finetune.max_epochs}};
    j["explain"] = {{"n_permutations", c.explain.n_permutations},
                    {"n_test_per_class", c.explain.n_test_per_class},
                    {"train_fraction", c.explain.train_fraction},
                    {"n_importance_tensors", c.explain.n_importance_tensors}};
    j["synth"] = {{"n_subjects", c.synth.n_subjects},
                  {"duration_s", c.synth.duration_s},
                  {"seizure_onset_s", c.synth.seizure_onset_s},
                  {"seizure_duration_s", c.synth.seizure_duration_s},
                  {"background_scale", c.synth.background_scale},
                  {"burst_gain", c.synth.burst_gain}};
    return j.dump(2);
}

// ---- hashing / manifests ------------------------------------------------------------

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot hash missing file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return fnv1a64(bytes.data(), bytes.size());
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string config_hash(const PipelineConfig& cfg) {
    const std::string dump = config_to_json(cfg);
    return hex64(fnv1a64(dump.data(), dump.size()));
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << text;
    if (!f) throw IoError("short write: " + path.string());
}

void write_manifest(const fs::path& dir, const std::string& command, const PipelineConfig& cfg,
                    const std::map<std::string, std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = cfg.seed;
    m["config_hash"] = "fnv1a64:" + config_hash(cfg);
    m["config"] = json::parse(config_to_json(cfg));
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    write_text(dir / (command + "_manifest.json"), m.dump(2) + "\n");
}

fs::path make_run_dir(const PipelineConfig& cfg, const std::string& command,
                      const std::string& out_override) {
    if (!out_override.empty()) {
        fs::create_directories(out_override);
        return out_override;
    }
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
    // timestamp + config hash: concurrent runs with different configs cannot collide
    fs::path dir = fs::path(cfg.paths.runs_dir) /
                   (command + "-" + stamp + "-" + config_hash(cfg).substr(0, 8));
    int suffix = 0;
    fs::path candidate = dir;
    while (fs::exists(candidate)) candidate = dir.string() + "." + std::to_string(++suffix);
    fs::create_directories(candidate);
    return candidate;
}

std::vector<std::string> list_files(const fs::path& dir, const std::string& ext) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

std::string metrics_row(const Metrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f", m.accuracy, m.sensitivity,
                  m.specificity, m.f1, m.roc_auc);
    return buf;
}

void write_history_csv(const fs::path& path, const History& h) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,lr\n";
    char buf[160];
    for (const auto& e : h.epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g\n", e.epoch, e.train_loss,
                      e.val_loss, e.lr);
        out << buf;
    }
    write_text(path, out.str());
}

json summary_entry(const MetricSummary& s) {
    return json{{"mean", s.mean}, {"std", s.stdev}};
}

// ---- dataset assembly ------------------------------------------------------------------

struct LoadedFeatures {
    FeatureDataset data;
    std::vector<std::string> excluded_subjects;  // missing one of the two classes
};

std::vector<std::string> manifest_outputs(const fs::path& dir, const std::string& command) {
    const fs::path mpath = dir / (command + "_manifest.json");
    if (!fs::exists(mpath))
        throw IoError("missing manifest " + mpath.string() + "; run `" + command + "` first");
    std::ifstream f(mpath);
    json m = json::parse(std::string((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>()));
    std::vector<std::string> outs;
    for (const auto& o : m.at("outputs")) outs.push_back(o.get<std::string>());
    return outs;
}

LoadedFeatures load_features(const PipelineConfig& cfg) {
    LoadedFeatures out;
    for (const std::string& path : manifest_outputs(cfg.paths.cache_dir, "featurize")) {
        FeatureCache cache = read_feature_cache(path);
        bool has_pre = false, has_inter = false;
        for (const auto& t : cache.tensors) (t.label == 1 ? has_pre : has_inter) = true;
        if (!has_pre || !has_inter) {
            out.excluded_subjects.push_back(cache.subject_id);
            continue;
        }
        for (auto& t : cache.tensors) out.data.push_back(std::move(t));
    }
    if (out.data.empty()) throw DataError("no eligible subjects in the feature cache");
    return out;
}

ModelConfig arch_for(const PipelineConfig& cfg, const FeatureDataset& data) {
    ModelConfig arch = cfg.model;
    arch.in_channels = static_cast<int>(data[0].n_channels);
    arch.input_h = static_cast<int>(data[0].n_coeffs);
    arch.input_w = static_cast<int>(data[0].n_frames);
    arch.validate();
    return arch;
}

// ---- commands ---------------------------------------------------------------------------

void cmd_synth(const PipelineConfig& cfg) {
    fs::create_directories(cfg.paths.raw_dir);
    std::vector<std::string> outputs;
    for (int i = 0; i < cfg.synth.n_subjects; ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "s%02d", i + 1);
        SynthConfig sc;
        sc.fs = cfg.signal.expected_fs;
        sc.duration_s = cfg.synth.duration_s;
        sc.seizure_intervals = {{cfg.synth.seizure_onset_s,
                                 cfg.synth.seizure_onset_s + cfg.synth.seizure_duration_s}};
        sc.seed = cfg.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(i + 1));
        sc.background_scale = cfg.synth.background_scale;
        sc.burst_gain = cfg.synth.burst_gain;
        sc.preictal_lead_s = cfg.timing.preictal_s;  // give preictal windows a signature
        const auto [rec, ann] = synth_record(sc, id);

        const fs::path edf = fs::path(cfg.paths.raw_dir) / (std::string(id) + ".edf");
        const fs::path csv = fs::path(cfg.paths.raw_dir) / (std::string(id) + ".csv");
        write_edf_file(rec, edf.string());
        write_annotations_file(ann, csv.string());
        outputs.push_back(edf.string());
        outputs.push_back(csv.string());
        std::cout << "synth: wrote " << edf.string() << " (" << rec.duration_s() << " s, "
                  << rec.n_channels() << " electrodes)\n";
    }
    write_manifest(cfg.paths.raw_dir, "synth", cfg, {}, outputs);
}

void cmd_ingest(const PipelineConfig& cfg) {
    if (!fs::is_directory(cfg.paths.raw_dir))
        throw IoError("paths.raw_dir: directory does not exist: " + cfg.paths.raw_dir);
    const std::vector<std::string> edfs = list_files(cfg.paths.raw_dir, ".edf");
    if (edfs.empty()) throw DataError("paths.raw_dir: no .edf recordings in " + cfg.paths.raw_dir);
    fs::create_directories(cfg.paths.cache_dir);

    std::map<std::string, std::string> inputs;
    std::vector<std::string> outputs;
    for (const std::string& edf_path : edfs) {
        const std::string subject = fs::path(edf_path).stem().string();
        const fs::path ann_path = fs::path(cfg.paths.raw_dir) / (subject + ".csv");
        if (!fs::exists(ann_path))
            throw IoError("paths.raw_dir: missing annotation sidecar " + ann_path.string());

        ParseReport report;
        Recording rec = parse_edf_file(edf_path, subject, &report);
        for (const auto& w : report.warnings) std::cerr << "ingest: " << subject << ": " << w << "\n";
        for (auto& label : rec.electrodes) {
            auto it = cfg.electrode_aliases.find(label);
            if (it != cfg.electrode_aliases.end()) label = it->second;
        }
        if (rec.fs != cfg.signal.expected_fs)
            std::cerr << "ingest: " << subject << ": fs " << rec.fs << " != expected "
                      << cfg.signal.expected_fs << " (filters use the recording's fs)\n";

        const AnnotationSet ann = read_annotations_file(ann_path.string());
        const std::vector<SeizureInterval> seizures =
            consensus_intervals(ann, cfg.signal.min_consensus_overlap_s);

        std::vector<std::vector<double>> channels = build_montage(rec, cfg.montage);
        const BiquadCascade bandpass = design_butterworth(
            BandKind::bandpass, cfg.signal.bandpass_lo, cfg.signal.bandpass_hi,
            cfg.signal.filter_order, rec.fs);
        const BiquadCascade notch = design_butterworth(
            BandKind::bandstop, cfg.signal.notch_hz - cfg.signal.notch_halfwidth_hz,
            cfg.signal.notch_hz + cfg.signal.notch_halfwidth_hz, cfg.signal.filter_order, rec.fs);
        parallel_for(channels.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t c = lo; c < hi; ++c) {
                channels[c] = apply_zero_phase(bandpass, channels[c]);
                channels[c] = apply_zero_phase(notch, channels[c]);
            }
        });
        int fs = rec.fs;
        if (cfg.signal.downsample > 1) {
            for (auto& ch : channels) ch = downsample(ch, cfg.signal.downsample);
            fs = rec.fs / cfg.signal.downsample;
        }

        const std::vector<LabeledSegment> segments =
            label_windows(channels, fs, subject, seizures, cfg.timing);
        std::size_t n_pre = 0;
        for (const auto& seg : segments) n_pre += seg.label == 1 ? 1 : 0;

        const std::string tag = hex64(fnv1a64_file(edf_path) ^
                                      fnv1a64(config_to_json(cfg).data(),
                                              config_to_json(cfg).size())).substr(0, 8);
        const fs::path out = fs::path(cfg.paths.cache_dir) / (subject + "-" + tag + ".seg");
        write_segment_cache(segments, subject, fs, cfg.timing.window_s, out.string());
        inputs[edf_path] = "fnv1a64:" + hex64(fnv1a64_file(edf_path));
        inputs[ann_path.string()] = "fnv1a64:" + hex64(fnv1a64_file(ann_path.string()));
        outputs.push_back(out.string());
        std::cout << "ingest: " << subject << ": " << seizures.size() << " consensus seizures, "
                  << n_pre << " preictal + " << segments.size() - n_pre
                  << " interictal windows\n";
    }
    write_manifest(cfg.paths.cache_dir, "ingest", cfg, inputs, outputs);
}

void cmd_featurize(const PipelineConfig& cfg) {
    const std::vector<std::string> seg_files = manifest_outputs(cfg.paths.cache_dir, "ingest");
    std::map<std::string, std::string> inputs;
    std::vector<std::string> outputs;
    for (const std::string& seg_path : seg_files) {
        const SegmentCache cache = read_segment_cache(seg_path);
        const MelFilterbank fb = build_mel_filterbank(cfg.mfcc, cache.fs);
        std::vector<MfccTensor> tensors(cache.segments.size());
        parallel_for(cache.segments.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i)
                tensors[i] = featurize_segment(cache.segments[i], cfg.mfcc, cache.fs, fb);
        });
        const fs::path out = fs::path(seg_path).replace_extension(".fea");
        write_feature_cache(tensors, cache.subject_id, out.string());
        inputs[seg_path] = "fnv1a64:" + hex64(fnv1a64_file(seg_path));
        outputs.push_back(out.string());
        std::cout << "featurize: " << cache.subject_id << ": " << tensors.size()
                  << " tensors";
        if (!tensors.empty())
            std::cout << " of shape (" << tensors[0].n_channels << ", " << tensors[0].n_coeffs
                      << ", " << tensors[0].n_frames << ")";
        std::cout << "\n";
    }
    write_manifest(cfg.paths.cache_dir, "featurize", cfg, inputs, outputs);
}

void cmd_train_cv(const PipelineConfig& cfg, const std::string& out_dir) {
    const LoadedFeatures loaded = load_features(cfg);
    for (const auto& s : loaded.excluded_subjects)
        std::cerr << "train-cv: excluding subject " << s << " (single-class)\n";
    const ModelConfig arch = arch_for(cfg, loaded.data);

    const fs::path dir = make_run_dir(cfg, "train-cv", out_dir);
    fs::create_directories(dir / "checkpoints");
    fs::create_directories(dir / "history");
    const std::string run_id = "train-cv-" + config_hash(cfg).substr(0, 8);

    std::ostringstream folds_csv;
    folds_csv << "run_id,trial,fold,accuracy,sensitivity,specificity,f1,auc\n";
    std::vector<std::string> outputs;
    const RunSummary summary = kfold_cv(
        loaded.data, cfg.cv.folds, cfg.cv.trials, cfg.training, arch,
        [&](int trial, int fold, SeizurePredictor& model, const Metrics& m, const History& h) {
            folds_csv << run_id << "," << trial << "," << fold << "," << metrics_row(m) << "\n";
            char name[64];
            std::snprintf(name, sizeof(name), "trial%d_fold%d", trial, fold);
            save_checkpoint(model, (dir / "checkpoints" / (std::string(name) + ".ckpt")).string());
            write_history_csv(dir / "history" / (std::string(name) + ".csv"), h);
            std::cout << "train-cv: trial " << trial << " fold " << fold << ": "
                      << metrics_row(m) << "\n";
        });

    if (!summary.stratified)
        std::cerr << "train-cv: a class has fewer segments than folds; "
                     "stratification degraded to a plain split\n";
    write_text(dir / "folds.csv", folds_csv.str());
    json s;
    s["run_id"] = run_id;
    s["stratified"] = summary.stratified;
    s["n_segments"] = loaded.data.size();
    s["accuracy"] = summary_entry(summary.accuracy());
    s["sensitivity"] = summary_entry(summary.sensitivity());
    s["specificity"] = summary_entry(summary.specificity());
    s["f1"] = summary_entry(summary.f1());
    s["auc"] = summary_entry(summary.auc());
    write_text(dir / "summary.json", s.dump(2) + "\n");
    outputs.push_back((dir / "folds.csv").string());
    outputs.push_back((dir / "summary.json").string());
    write_manifest(dir, "train-cv", cfg, {}, outputs);
    std::cout << "train-cv: mean f1 " << summary.f1().mean << " +- " << summary.f1().stdev
              << " -> " << dir.string() << "\n";
}

void cmd_train_lopo(const PipelineConfig& cfg, const std::string& out_dir) {
    const LoadedFeatures loaded = load_features(cfg);
    const ModelConfig arch = arch_for(cfg, loaded.data);
    const fs::path dir = make_run_dir(cfg, "train-lopo", out_dir);
    fs::create_directories(dir / "history");
    const std::string run_id = "train-lopo-" + config_hash(cfg).substr(0, 8);

    std::vector<LopoRound> rounds = lopo(loaded.data, cfg.training, arch);

    std::ostringstream csv;
    csv << "run_id,subject,accuracy,sensitivity,specificity,f1,auc\n";
    std::vector<double> acc, sen, spec, f1, auc;
    std::vector<std::string> outputs;
    for (auto& r : rounds) {
        csv << run_id << "," << r.subject << "," << metrics_row(r.metrics) << "\n";
        const std::string ckpt = (dir / ("lopo_" + r.subject + ".ckpt")).string();
        save_checkpoint(r.model, ckpt);
        write_history_csv(dir / "history" / (r.subject + ".csv"), r.history);
        outputs.push_back(ckpt);
        acc.push_back(r.metrics.accuracy);
        sen.push_back(r.metrics.sensitivity);
        spec.push_back(r.metrics.specificity);
        f1.push_back(r.metrics.f1);
        auc.push_back(r.metrics.roc_auc);
        std::cout << "train-lopo: " << r.subject << ": " << metrics_row(r.metrics) << "\n";
    }
    write_text(dir / "lopo.csv", csv.str());
    json s;
    auto put_summary = [&](const char* key, const std::vector<double>& xs) {
        const auto [mean, stdev] = mean_std(xs);
        s[key] = json{{"mean", mean}, {"std", stdev}};
    };
    put_summary("accuracy", acc);
    put_summary("sensitivity", sen);
    put_summary("specificity", spec);
    put_summary("f1", f1);
    put_summary("auc", auc);
    write_text(dir / "summary.json", s.dump(2) + "\n");
    outputs.push_back((dir / "lopo.csv").string());
    write_manifest(dir, "train-lopo", cfg, {}, outputs);
    std::cout << "train-lopo: " << rounds.size() << " rounds -> " << dir.string() << "\n";
}

void cmd_finetune(const PipelineConfig& cfg, const std::string& from_run,
                  const std::string& out_dir) {
    if (from_run.empty())
        throw ConfigError("--from: finetune needs the directory of a train-lopo run");
    if (!fs::is_directory(from_run))
        throw IoError("--from: directory does not exist: " + from_run);
    const LoadedFeatures loaded = load_features(cfg);
    const auto by_subject = indices_by_subject(loaded.data);
    const fs::path dir = make_run_dir(cfg, "finetune", out_dir);

    TrainConfig ft = cfg.training;
    ft.max_epochs = cfg.finetune.max_epochs;
    ft.early_stop_patience = cfg.finetune.max_epochs;  // tiny sets: run the budget out
    ft.val_fraction = 0.0;

    std::ostringstream csv;
    csv << "subject,n_tune,lopo_accuracy,lopo_sensitivity,lopo_specificity,lopo_f1,lopo_auc,"
           "ft_accuracy,ft_sensitivity,ft_specificity,ft_f1,ft_auc\n";
    std::vector<double> before_f1, after_f1;
    std::uint64_t subject_no = 0;
    for (const auto& [subject, idx] : by_subject) {
        const fs::path ckpt = fs::path(from_run) / ("lopo_" + subject + ".ckpt");
        if (!fs::exists(ckpt)) {
            std::cerr << "finetune: no checkpoint for subject " << subject << ", skipping\n";
            continue;
        }
        SeizurePredictor pretrained = load_checkpoint(ckpt.string());
        TrainConfig ft_subject = ft;
        ft_subject.seed = cfg.seed + 31 * (++subject_no);
        try {
            const FinetuneResult r =
                finetune(pretrained, subset(loaded.data, idx), cfg.finetune.n_per_class, ft_subject);
            csv << subject << "," << 2 * cfg.finetune.n_per_class << "," << metrics_row(r.before)
                << "," << metrics_row(r.after) << "\n";
            before_f1.push_back(r.before.f1);
            after_f1.push_back(r.after.f1);
            std::cout << "finetune: " << subject << ": f1 " << r.before.f1 << " -> " << r.after.f1
                      << "\n";
        } catch (const DataError& e) {
            std::cerr << "finetune: " << subject << ": " << e.what() << ", skipping\n";
        }
    }
    write_text(dir / "finetune.csv", csv.str());
    json s;
    const auto [bm, bs] = mean_std(before_f1);
    const auto [am, as] = mean_std(after_f1);
    s["n_per_class"] = cfg.finetune.n_per_class;
    s["lopo_f1"] = json{{"mean", bm}, {"std", bs}};
    s["finetuned_f1"] = json{{"mean", am}, {"std", as}};
    write_text(dir / "summary.json", s.dump(2) + "\n");
    write_manifest(dir, "finetune", cfg, {{"from_run", from_run}},
                   {(dir / "finetune.csv").string()});
    std::cout << "finetune: mean f1 " << bm << " -> " << am << " -> " << dir.string() << "\n";
}

void cmd_explain(const PipelineConfig& cfg, const std::string& out_dir) {
    const LoadedFeatures loaded = load_features(cfg);
    const ModelConfig arch = arch_for(cfg, loaded.data);
    const fs::path dir = make_run_dir(cfg, "explain", out_dir);
    fs::create_directories(dir / "attributions");

    const ExplainSplit split = build_explain_testset(
        loaded.data, cfg.explain.n_test_per_class, cfg.explain.train_fraction, cfg.seed);
    for (const auto& s : split.skipped_subjects)
        std::cerr << "explain: subject " << s << " lacks " << cfg.explain.n_test_per_class
                  << " segments per class, skipped\n";

    SeizurePredictor model = SeizurePredictor::init(arch, cfg.seed ^ 0x5851f42d4c957f2dull);
    TrainConfig tc = cfg.training;
    tc.seed = cfg.seed + 97;
    tc.val_fraction = 0.0;  // explicit 70/30 split below
    train(model, subset(loaded.data, split.retrain_train_idx),
          subset(loaded.data, split.retrain_val_idx), tc);
    save_checkpoint(model, (dir / "retrained.ckpt").string());

    std::ostringstream csv;
    csv << "subject,channel,raw_importance,processed_importance\n";
    std::vector<std::string> outputs;
    std::uint64_t subject_no = 0;
    for (const auto& [subject, idx] : indices_by_subject(loaded.data)) {
        ++subject_no;
        if (std::find(split.skipped_subjects.begin(), split.skipped_subjects.end(), subject) !=
            split.skipped_subjects.end())
            continue;
        // the withheld preictal segments of this subject, chronological
        std::vector<std::size_t> withheld;
        for (std::size_t i : split.test_idx)
            if (loaded.data[i].subject_id == subject && loaded.data[i].label == 1)
                withheld.push_back(i);
        std::sort(withheld.begin(), withheld.end(), [&](std::size_t a, std::size_t b) {
            return loaded.data[a].t_start < loaded.data[b].t_start;
        });

        std::vector<AttributionTensor> attrs;
        for (int k = 0; k < cfg.explain.n_importance_tensors &&
                        k < static_cast<int>(withheld.size()); ++k) {
            const MfccTensor& x = loaded.data[withheld[static_cast<std::size_t>(k)]];
            attrs.push_back(shapley_attribution(model, x, zeros_like(x),
                                                cfg.explain.n_permutations,
                                                cfg.seed ^ (subject_no * 1000 + k)));
        }
        if (attrs.size() < 3) continue;
        const ChannelImportance imp = channel_importance(attrs);

        const std::vector<std::string> names = cfg.montage.channel_names();
        for (std::size_t c = 0; c < imp.raw.size(); ++c) {
            const std::string name =
                c < names.size() && imp.raw.size() == names.size() ? names[c]
                                                                   : "ch" + std::to_string(c);
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f\n", subject.c_str(), name.c_str(),
                          imp.raw[c], c < imp.processed.size() ? imp.processed[c] : 0.0);
            csv << buf;
        }
        const std::string att_path = (dir / "attributions" / (subject + ".att")).string();
        write_attribution_file(attrs, att_path);
        outputs.push_back(att_path);
        std::cout << "explain: " << subject << ": " << attrs.size() << " attribution tensors\n";
    }
    write_text(dir / "importance.csv", csv.str());
    outputs.push_back((dir / "importance.csv").string());
    write_manifest(dir, "explain", cfg, {}, outputs);
    std::cout << "explain: wrote " << (dir / "importance.csv").string() << "\n";
}

void cmd_scalp_plot(const PipelineConfig& cfg, const std::string& from_run,
                    const std::string& out_dir) {
    if (from_run.empty())
        throw ConfigError("--from: scalp-plot needs the directory of an explain run");
    const fs::path imp_path = fs::path(from_run) / "importance.csv";
    if (!fs::exists(imp_path)) throw IoError("--from: missing " + imp_path.string());

    std::ifstream f(imp_path);
    std::string line;
    std::getline(f, line);  // header
    std::map<std::string, std::map<std::string, double>> by_subject;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string subject, channel, raw, processed;
        std::getline(row, subject, ',');
        std::getline(row, channel, ',');
        std::getline(row, raw, ',');
        std::getline(row, processed, ',');
        by_subject[subject][channel] = std::stod(processed);
    }

    const fs::path dir = make_run_dir(cfg, "scalp-plot", out_dir);
    std::vector<std::string> outputs;
    for (const auto& [subject, channels] : by_subject) {
        std::vector<double> imp;
        for (const auto& [a, b] : cfg.montage.eeg_pairs) {
            const auto it = channels.find(a + "-" + b);
            imp.push_back(it == channels.end() ? 0.0 : it->second);
        }
        const std::string svg = render_scalp_svg(imp, cfg.montage, subject);
        const fs::path out = dir / (subject + ".svg");
        write_text(out, svg);
        outputs.push_back(out.string());
        std::cout << "scalp-plot: wrote " << out.string() << "\n";
    }
    write_manifest(dir, "scalp-plot", cfg, {{"from_run", from_run}}, outputs);
}

}  // namespace

int run_command(const RunOptions& opt) {
    try {
        PipelineConfig cfg = opt.config_path.empty() ? parse_config("", opt.set_overrides)
                                                     : load_config(opt.config_path, opt.set_overrides);
        if (opt.seed) cfg.seed = *opt.seed;
        validate_config(cfg);

        if (opt.command == "synth")
            cmd_synth(cfg);
        else if (opt.command == "ingest")
            cmd_ingest(cfg);
        else if (opt.command == "featurize")
            cmd_featurize(cfg);
        else if (opt.command == "train-cv")
            cmd_train_cv(cfg, opt.out_dir);
        else if (opt.command == "train-lopo")
            cmd_train_lopo(cfg, opt.out_dir);
        else if (opt.command == "finetune")
            cmd_finetune(cfg, opt.from_run, opt.out_dir);
        else if (opt.command == "explain")
            cmd_explain(cfg, opt.out_dir);
        else if (opt.command == "scalp-plot")
            cmd_scalp_plot(cfg, opt.from_run, opt.out_dir);
        else {
            std::cerr << "unknown command: " << opt.command << "\n";
            return 2;
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace preictal
