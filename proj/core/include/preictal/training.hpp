#pragma once

#include <string>
#include <vector>

#include "preictal/dataset.hpp"
#include "preictal/metrics.hpp"
#include "preictal/model.hpp"
#include "preictal/optim.hpp"

namespace preictal {

struct TrainConfig {
    double lr = 4e-4;
    int batch_size = 256;
    double weight_decay = 5e-3;
    double w_pos = 0.52;  // weight on the positive (preictal) BCE term
    PlateauConfig scheduler;
    int max_epochs = 300;
    int early_stop_patience = 60;
    double val_fraction = 0.1;  // carved from training data when no val set is given
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct History {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_loss = 0.0;
};

// Weighted BCE + Adam with per-epoch shuffling, plateau scheduling and early
// stopping on validation loss; the model is left at its best-validation
// parameters. An empty val set falls back to the training loss for scheduling.
History train(SeizurePredictor& model, const FeatureDataset& train_set,
              const FeatureDataset& val_set, const TrainConfig& cfg);

Metrics evaluate(SeizurePredictor& model, const FeatureDataset& test_set);
std::vector<double> predict_scores(SeizurePredictor& model, const FeatureDataset& test_set);

// ---- protocol splits -----------------------------------------------------------

// k folds with per-class round-robin assignment: class proportions within +-1
// segment and fold sizes within +-1. Degrades to a plain split (with
// stratified=false) when a class has fewer members than k.
struct FoldAssignment {
    std::vector<std::vector<std::size_t>> folds;
    bool stratified = true;
};
FoldAssignment stratified_folds(const std::vector<int>& labels, int k, Rng& rng);

// chronologically first n preictal + n seeded-random interictal segments;
// everything else is the evaluation remainder
struct FinetuneSplit {
    std::vector<std::size_t> tune_idx;
    std::vector<std::size_t> eval_idx;
};
FinetuneSplit build_finetune_split(const FeatureDataset& subject_data, int n_per_class,
                                   std::uint64_t seed);

// stratified train/val split by fraction
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    const std::vector<int>& labels, double val_fraction, Rng& rng);

// ---- evaluation protocols ---------------------------------------------------------

struct MetricSummary {
    double mean = 0.0;
    double stdev = 0.0;
};

struct RunSummary {
    std::vector<std::vector<Metrics>> trials;  // [trial][fold]
    bool stratified = true;

    // per-trial fold means, then mean / population std across trials
    MetricSummary accuracy() const;
    MetricSummary sensitivity() const;
    MetricSummary specificity() const;
    MetricSummary f1() const;
    MetricSummary auc() const;
};

// invoked after each fold finishes, e.g. to persist checkpoints and histories
using FoldCallback =
    std::function<void(int trial, int fold, SeizurePredictor& model, const Metrics& metrics,
                       const History& history)>;

RunSummary kfold_cv(const FeatureDataset& data, int k, int trials, const TrainConfig& cfg,
                    const ModelConfig& arch, const FoldCallback& on_fold = nullptr);

struct LopoRound {
    std::string subject;
    std::vector<std::string> train_subjects;  // audit trail: held-out never appears
    Metrics metrics;            // on the full held-out subject
    History history;
    SeizurePredictor model;     // trained on everyone else
};

std::vector<LopoRound> lopo(const FeatureDataset& data, const TrainConfig& cfg,
                            const ModelConfig& arch);

struct FinetuneResult {
    std::string subject;
    Metrics before;  // pretrained model on the evaluation remainder
    Metrics after;   // fine-tuned model on the same remainder
    FinetuneSplit split;
};

// Fine-tunes every layer of (a copy of) the pretrained model on the 2n tune
// segments and reports paired metrics on the remainder.
FinetuneResult finetune(const SeizurePredictor& pretrained, const FeatureDataset& subject_data,
                        int n_per_class, const TrainConfig& cfg_ft);

SeizurePredictor clone_model(const SeizurePredictor& m);

}  // namespace preictal
