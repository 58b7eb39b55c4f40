#include "preictal/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace preictal {

void TrainConfig::validate() const {
    if (lr <= 0) throw ConfigError("training: lr must be positive");
    if (batch_size < 2) throw ConfigError("training: batch_size must be >= 2");
    if (weight_decay < 0) throw ConfigError("training: weight_decay must be >= 0");
    if (!(w_pos > 0.0 && w_pos < 1.0)) throw ConfigError("training: w_pos must be in (0,1)");
    if (!(scheduler.factor > 0.0 && scheduler.factor < 1.0))
        throw ConfigError("training: scheduler factor must be in (0,1)");
    if (scheduler.patience < 0 || scheduler.min_lr <= 0)
        throw ConfigError("training: scheduler patience/min_lr invalid");
    if (max_epochs < 1) throw ConfigError("training: max_epochs must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("training: early_stop_patience must be >= 1");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("training: val_fraction must be in [0,1)");
}

namespace {

double dataset_loss(SeizurePredictor& model, const FeatureDataset& data, double w_pos) {
    double acc = 0.0;
    std::size_t used = 0;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); i += 256) {
        idx.clear();
        for (std::size_t j = i; j < std::min(data.size(), i + 256); ++j) idx.push_back(j);
        const Var p = model.forward(constant(stack_batch(data, idx)));
        const Var loss = weighted_bce(p, label_tensor(data, idx), w_pos);
        acc += loss.value()[0] * static_cast<double>(idx.size());
        used += idx.size();
    }
    return used ? acc / static_cast<double>(used) : 0.0;
}

}  // namespace

History train(SeizurePredictor& model, const FeatureDataset& train_set,
              const FeatureDataset& val_set, const TrainConfig& cfg) {
    cfg.validate();
    bool has_pos = false, has_neg = false;
    for (const auto& x : train_set) (x.label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw DataError("train: training set must contain both classes");
    if (train_set.size() < 2) throw DataError("train: need at least 2 training segments");

    Rng root(cfg.seed);
    Rng shuffle_rng = root.split(1);
    Rng dropout_rng = root.split(2);

    Adam opt(model.parameters(),
             {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    PlateauScheduler sched(cfg.scheduler, cfg.lr);

    History hist;
    double best_val = 1e300;
    int bad_epochs = 0;
    std::vector<Tensor> best_snap = model.snapshot();
    std::uint64_t best_step = model.step;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t hi = std::min(order.size(), i + static_cast<std::size_t>(cfg.batch_size));
            if (hi - i < 2) continue;  // batchnorm needs >= 2 samples
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(i),
                                               order.begin() + static_cast<std::ptrdiff_t>(hi));
            SeizurePredictor::ForwardOptions fo;
            fo.mode = Mode::train;
            fo.rng = &dropout_rng;
            const Var p = model.forward(constant(stack_batch(train_set, idx)), fo);
            const Var loss = weighted_bce(p, label_tensor(train_set, idx), cfg.w_pos);
            opt.zero_grad();
            backward(loss);
            opt.step();
            ++model.step;
            epoch_loss += loss.value()[0] * static_cast<double>(idx.size());
            used += idx.size();
        }
        epoch_loss = used ? epoch_loss / static_cast<double>(used) : 0.0;

        const double val_loss =
            val_set.empty() ? epoch_loss : dataset_loss(model, val_set, cfg.w_pos);
        opt.set_lr(sched.step(val_loss));

        hist.epochs.push_back({epoch, epoch_loss, val_loss, opt.lr()});

        if (val_loss < best_val - cfg.scheduler.improve_threshold) {
            best_val = val_loss;
            best_snap = model.snapshot();
            best_step = model.step;
            hist.best_epoch = epoch;
            bad_epochs = 0;
        } else if (++bad_epochs >= cfg.early_stop_patience) {
            break;
        }
    }

    model.restore(best_snap);
    model.step = best_step;
    hist.best_val_loss = best_val;
    return hist;
}

std::vector<double> predict_scores(SeizurePredictor& model, const FeatureDataset& test_set) {
    std::vector<double> scores;
    scores.reserve(test_set.size());
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < test_set.size(); i += 256) {
        idx.clear();
        for (std::size_t j = i; j < std::min(test_set.size(), i + 256); ++j) idx.push_back(j);
        const std::vector<double> p = model.predict(stack_batch(test_set, idx));
        scores.insert(scores.end(), p.begin(), p.end());
    }
    return scores;
}

Metrics evaluate(SeizurePredictor& model, const FeatureDataset& test_set) {
    if (test_set.empty()) return {};
    return evaluate_scores(predict_scores(model, test_set), labels_of(test_set));
}

// ---- splits ------------------------------------------------------------------------

FoldAssignment stratified_folds(const std::vector<int>& labels, int k, Rng& rng) {
    if (k < 2) throw ConfigError("stratified_folds: k must be >= 2");
    if (labels.size() < static_cast<std::size_t>(k))
        throw DataError("stratified_folds: fewer segments than folds");

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);

    FoldAssignment fa;
    fa.folds.assign(k, {});
    if (pos.size() < static_cast<std::size_t>(k) || neg.size() < static_cast<std::size_t>(k)) {
        // too few of one class to stratify: plain shuffled split
        fa.stratified = false;
        std::vector<std::size_t> all(labels.size());
        std::iota(all.begin(), all.end(), 0);
        rng.shuffle(all);
        for (std::size_t i = 0; i < all.size(); ++i)
            fa.folds[i % static_cast<std::size_t>(k)].push_back(all[i]);
        return fa;
    }

    rng.shuffle(neg);
    rng.shuffle(pos);
    // class-0 remainders fill the lowest folds, class-1 the highest, so fold
    // sizes stay within +-1 overall
    auto deal = [&](const std::vector<std::size_t>& cls, bool extras_low) {
        const std::size_t base = cls.size() / static_cast<std::size_t>(k);
        const std::size_t rem = cls.size() % static_cast<std::size_t>(k);
        std::size_t next = 0;
        for (int f = 0; f < k; ++f) {
            const bool extra = extras_low ? (static_cast<std::size_t>(f) < rem)
                                          : (static_cast<std::size_t>(f) >= static_cast<std::size_t>(k) - rem);
            const std::size_t take = base + (extra ? 1 : 0);
            for (std::size_t j = 0; j < take; ++j) fa.folds[f].push_back(cls[next++]);
        }
    };
    deal(neg, true);
    deal(pos, false);
    return fa;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    const std::vector<int>& labels, double val_fraction, Rng& rng) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    rng.shuffle(pos);
    rng.shuffle(neg);

    std::vector<std::size_t> train, val;
    auto deal = [&](std::vector<std::size_t>& cls) {
        std::size_t n_val = 0;
        if (val_fraction > 0.0 && cls.size() >= 2)
            n_val = std::min(cls.size() - 1,
                             std::max<std::size_t>(1, static_cast<std::size_t>(
                                 std::llround(val_fraction * static_cast<double>(cls.size())))));
        for (std::size_t i = 0; i < cls.size(); ++i)
            (i < n_val ? val : train).push_back(cls[i]);
    };
    deal(neg);
    deal(pos);
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

FinetuneSplit build_finetune_split(const FeatureDataset& subject_data, int n_per_class,
                                   std::uint64_t seed) {
    if (n_per_class < 1) throw ConfigError("finetune: n_per_class must be >= 1");
    std::vector<std::size_t> pre, inter;
    for (std::size_t i = 0; i < subject_data.size(); ++i)
        (subject_data[i].label == 1 ? pre : inter).push_back(i);
    if (pre.size() < static_cast<std::size_t>(n_per_class))
        throw DataError("finetune: subject has only " + std::to_string(pre.size()) +
                        " preictal segments, need " + std::to_string(n_per_class));
    if (inter.size() < static_cast<std::size_t>(n_per_class))
        throw DataError("finetune: subject has only " + std::to_string(inter.size()) +
                        " interictal segments, need " + std::to_string(n_per_class));

    // consecutive preictal samples from the start of the earliest preictal span
    std::sort(pre.begin(), pre.end(), [&](std::size_t a, std::size_t b) {
        return subject_data[a].t_start < subject_data[b].t_start;
    });
    Rng rng(seed);
    rng.shuffle(inter);

    FinetuneSplit split;
    split.tune_idx.assign(pre.begin(), pre.begin() + n_per_class);
    split.tune_idx.insert(split.tune_idx.end(), inter.begin(), inter.begin() + n_per_class);
    std::sort(split.tune_idx.begin(), split.tune_idx.end());
    for (std::size_t i = 0; i < subject_data.size(); ++i)
        if (!std::binary_search(split.tune_idx.begin(), split.tune_idx.end(), i))
            split.eval_idx.push_back(i);
    return split;
}

// ---- cross-validation ------------------------------------------------------------------

namespace {

std::vector<double> collect(const std::vector<std::vector<Metrics>>& trials,
                            double Metrics::*field) {
    std::vector<double> trial_means;
    for (const auto& folds : trials) {
        double m = 0.0;
        for (const auto& f : folds) m += f.*field;
        trial_means.push_back(folds.empty() ? 0.0 : m / static_cast<double>(folds.size()));
    }
    return trial_means;
}

MetricSummary summarize(const std::vector<std::vector<Metrics>>& trials, double Metrics::*field) {
    const auto [mean, stdev] = mean_std(collect(trials, field));
    return {mean, stdev};
}

}  // namespace

MetricSummary RunSummary::accuracy() const { return summarize(trials, &Metrics::accuracy); }
MetricSummary RunSummary::sensitivity() const { return summarize(trials, &Metrics::sensitivity); }
MetricSummary RunSummary::specificity() const { return summarize(trials, &Metrics::specificity); }
MetricSummary RunSummary::f1() const { return summarize(trials, &Metrics::f1); }
MetricSummary RunSummary::auc() const { return summarize(trials, &Metrics::roc_auc); }

RunSummary kfold_cv(const FeatureDataset& data, int k, int trials, const TrainConfig& cfg,
                    const ModelConfig& arch, const FoldCallback& on_fold) {
    if (trials < 1) throw ConfigError("kfold_cv: trials must be >= 1");
    const std::vector<int> labels = labels_of(data);

    RunSummary summary;
    Rng root(cfg.seed);
    for (int trial = 0; trial < trials; ++trial) {
        Rng trial_rng = root.split(100 + static_cast<std::uint64_t>(trial));
        const FoldAssignment fa = stratified_folds(labels, k, trial_rng);
        summary.stratified = summary.stratified && fa.stratified;

        std::vector<Metrics> fold_metrics;
        for (int f = 0; f < k; ++f) {
            std::vector<std::size_t> train_idx;
            for (int g = 0; g < k; ++g)
                if (g != f)
                    train_idx.insert(train_idx.end(), fa.folds[g].begin(), fa.folds[g].end());
            std::sort(train_idx.begin(), train_idx.end());

            const FeatureDataset pool = subset(data, train_idx);
            Rng split_rng = trial_rng.split(1000 + static_cast<std::uint64_t>(f));
            const auto [tr, va] = split_train_val(labels_of(pool), cfg.val_fraction, split_rng);

            SeizurePredictor model = SeizurePredictor::init(
                arch, cfg.seed ^ (0x9e3779b9ull * (trial * 31 + f + 1)));
            TrainConfig fold_cfg = cfg;
            fold_cfg.seed = cfg.seed + static_cast<std::uint64_t>(trial) * 1000 + f;
            const History hist = train(model, subset(pool, tr), subset(pool, va), fold_cfg);

            fold_metrics.push_back(evaluate(model, subset(data, fa.folds[f])));
            if (on_fold) on_fold(trial, f, model, fold_metrics.back(), hist);
        }
        summary.trials.push_back(std::move(fold_metrics));
    }
    return summary;
}

std::vector<LopoRound> lopo(const FeatureDataset& data, const TrainConfig& cfg,
                            const ModelConfig& arch) {
    const std::vector<std::string> subjects = subjects_of(data);
    if (subjects.size() < 2) throw DataError("lopo: need at least 2 subjects");

    std::vector<LopoRound> rounds;
    const auto by_subject = indices_by_subject(data);
    std::uint64_t round_no = 0;
    for (const std::string& held_out : subjects) {
        std::vector<std::size_t> train_idx, test_idx;
        std::vector<std::string> train_subjects;
        for (const auto& [subj, idx] : by_subject) {
            auto& dst = (subj == held_out) ? test_idx : train_idx;
            dst.insert(dst.end(), idx.begin(), idx.end());
            if (subj != held_out) train_subjects.push_back(subj);
        }
        const FeatureDataset pool = subset(data, train_idx);
        Rng split_rng = Rng(cfg.seed).split(500 + round_no);
        const auto [tr, va] = split_train_val(labels_of(pool), cfg.val_fraction, split_rng);

        SeizurePredictor model =
            SeizurePredictor::init(arch, cfg.seed ^ (0xc2b2ae3d27d4eb4full * (round_no + 1)));
        TrainConfig round_cfg = cfg;
        round_cfg.seed = cfg.seed + 7919 * (round_no + 1);
        History hist = train(model, subset(pool, tr), subset(pool, va), round_cfg);

        LopoRound round{held_out, std::move(train_subjects),
                        evaluate(model, subset(data, test_idx)), std::move(hist),
                        std::move(model)};
        rounds.push_back(std::move(round));
        ++round_no;
    }
    return rounds;
}

SeizurePredictor clone_model(const SeizurePredictor& m) {
    SeizurePredictor copy(m.config());
    copy.restore(m.snapshot());
    copy.step = m.step;
    return copy;
}

FinetuneResult finetune(const SeizurePredictor& pretrained, const FeatureDataset& subject_data,
                        int n_per_class, const TrainConfig& cfg_ft) {
    FinetuneResult result;
    result.subject = subject_data.empty() ? "" : subject_data[0].subject_id;
    result.split = build_finetune_split(subject_data, n_per_class, cfg_ft.seed);

    const FeatureDataset tune = subset(subject_data, result.split.tune_idx);
    const FeatureDataset rest = subset(subject_data, result.split.eval_idx);

    SeizurePredictor model = clone_model(pretrained);
    result.before = evaluate(model, rest);

    TrainConfig cfg = cfg_ft;
    cfg.batch_size = std::max(2, std::min<int>(cfg.batch_size, static_cast<int>(tune.size())));
    train(model, tune, tune, cfg);  // tiny set: validate on the tune set itself

    result.after = evaluate(model, rest);
    return result;
}

}  // namespace preictal
