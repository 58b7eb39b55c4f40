#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "preictal/mfcc.hpp"
#include "preictal/model.hpp"
#include "preictal/montage.hpp"
#include "preictal/segmentation.hpp"
#include "preictal/training.hpp"

namespace preictal {

struct PathsConfig {
    std::string raw_dir = "data/raw";
    std::string cache_dir = "data/cache";
    std::string runs_dir = "runs";
};

struct SignalConfig {
    double bandpass_lo = 0.1;   // Hz
    double bandpass_hi = 70.0;  // Hz
    double notch_hz = 50.0;
    double notch_halfwidth_hz = 1.0;
    int filter_order = 4;
    int downsample = 1;
    int expected_fs = 256;  // before downsampling; used for config cross-checks
    double min_consensus_overlap_s = 10.0;
};

struct ExplainConfig {
    int n_permutations = 200;
    int n_test_per_class = 6;
    double train_fraction = 0.7;
    int n_importance_tensors = 3;  // preictal attributions averaged per subject
};

struct FinetuneConfig {
    int n_per_class = 12;  // 12 -> N=24 tuning segments, 60 -> N=120
    int max_epochs = 60;
};

struct SynthDatasetConfig {
    int n_subjects = 9;
    double duration_s = 600.0;
    double seizure_onset_s = 450.0;
    double seizure_duration_s = 60.0;
    double background_scale = 10.0;
    double burst_gain = 5.0;
};

struct CvConfig {
    int folds = 10;
    int trials = 3;
};

struct PipelineConfig {
    std::string profile = "synthetic";  // helsinki | siena | synthetic
    std::uint64_t seed = 1;
    PathsConfig paths;
    SignalConfig signal;
    TimingPolicy timing;
    std::map<std::string, std::string> electrode_aliases;  // recording label -> montage label
    MontageConfig montage = default_montage();
    MfccConfig mfcc;
    ModelConfig model;
    TrainConfig training;
    CvConfig cv;
    FinetuneConfig finetune;
    ExplainConfig explain;
    SynthDatasetConfig synth;
};

PipelineConfig default_config(const std::string& profile);

// JSON (comments allowed) over profile defaults, then dotted-key overrides
// ("training.lr=0.002"). Collects every violation before throwing ConfigError,
// one "field.path: message" line per problem.
PipelineConfig parse_config(const std::string& json_text,
                            const std::vector<std::string>& overrides = {});
PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
void validate_config(const PipelineConfig& cfg);  // throws ConfigError listing all violations

std::string config_to_json(const PipelineConfig& cfg);  // canonical resolved form

// ---- commands -------------------------------------------------------------------

struct RunOptions {
    std::string command;  // synth | ingest | featurize | train-cv | train-lopo |
                          // finetune | explain | scalp-plot
    std::string config_path;                 // empty: profile defaults
    std::vector<std::string> set_overrides;  // key=value
    std::optional<std::uint64_t> seed;
    std::string out_dir;   // empty: timestamped dir under runs_dir
    std::string from_run;  // finetune: LOPO run dir; scalp-plot: explain run dir
};

// Executes one subcommand; returns the process exit code (0 ok, 1 failure,
// 2 usage). Failures print one line naming the offending field or path.
int run_command(const RunOptions& opt);

// 64-bit FNV-1a, used for config/input content addressing in manifests
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace preictal
