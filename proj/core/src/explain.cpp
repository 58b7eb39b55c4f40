#include "preictal/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "preictal/training.hpp"

namespace preictal {

ExplainSplit build_explain_testset(const FeatureDataset& data, int n_per_class,
                                   double train_fraction, std::uint64_t seed) {
    if (n_per_class < 1) throw ConfigError("explain: n_per_class must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("explain: train_fraction must be in (0,1)");

    ExplainSplit split;
    std::vector<std::size_t> remainder;
    Rng root(seed);

    std::uint64_t subject_no = 0;
    for (const auto& [subject, idx] : indices_by_subject(data)) {
        std::vector<std::size_t> pre, inter;
        for (std::size_t i : idx) (data[i].label == 1 ? pre : inter).push_back(i);
        if (pre.size() < static_cast<std::size_t>(n_per_class) ||
            inter.size() < static_cast<std::size_t>(n_per_class)) {
            split.skipped_subjects.push_back(subject);
            remainder.insert(remainder.end(), idx.begin(), idx.end());
            ++subject_no;
            continue;
        }
        std::sort(pre.begin(), pre.end(), [&](std::size_t a, std::size_t b) {
            return data[a].t_start < data[b].t_start;
        });
        Rng rng = root.split(subject_no);
        rng.shuffle(inter);

        std::vector<std::size_t> withheld(pre.begin(), pre.begin() + n_per_class);
        withheld.insert(withheld.end(), inter.begin(), inter.begin() + n_per_class);
        std::sort(withheld.begin(), withheld.end());
        split.test_idx.insert(split.test_idx.end(), withheld.begin(), withheld.end());
        for (std::size_t i : idx)
            if (!std::binary_search(withheld.begin(), withheld.end(), i)) remainder.push_back(i);
        ++subject_no;
    }

    // 70/30 stratified split of the remainder for retraining
    std::vector<int> rem_labels;
    rem_labels.reserve(remainder.size());
    for (std::size_t i : remainder) rem_labels.push_back(data[i].label);
    Rng split_rng = root.split(0xabcdef);
    const auto [tr, va] = split_train_val(rem_labels, 1.0 - train_fraction, split_rng);
    for (std::size_t j : tr) split.retrain_train_idx.push_back(remainder[j]);
    for (std::size_t j : va) split.retrain_val_idx.push_back(remainder[j]);
    std::sort(split.retrain_train_idx.begin(), split.retrain_train_idx.end());
    std::sort(split.retrain_val_idx.begin(), split.retrain_val_idx.end());
    std::sort(split.test_idx.begin(), split.test_idx.end());
    return split;
}

std::vector<double> postprocess_importance(const std::vector<double>& raw) {
    if (raw.size() < 2) throw ConfigError("postprocess_importance: need EEG channels plus ECG");
    std::vector<double> eeg(raw.begin(), raw.end() - 1);  // drop the ECG row
    for (double& v : eeg) v = std::max(0.0, v);           // keep positive contributions only

    const double lo = *std::min_element(eeg.begin(), eeg.end());
    const double hi = *std::max_element(eeg.begin(), eeg.end());
    if (hi > lo) {
        for (double& v : eeg) v = (v - lo) / (hi - lo);
    } else if (hi > 0.0) {
        std::fill(eeg.begin(), eeg.end(), 1.0);  // equal positive importance everywhere
    } else {
        std::fill(eeg.begin(), eeg.end(), 0.0);
    }
    return eeg;
}

ChannelImportance channel_importance(const std::vector<AttributionTensor>& preictal_attrs) {
    if (preictal_attrs.size() < 3)
        throw DataError("channel_importance: need at least 3 preictal attribution tensors, got " +
                        std::to_string(preictal_attrs.size()));
    const AttributionTensor& first = preictal_attrs[0];
    for (std::size_t i = 1; i < 3; ++i)
        if (preictal_attrs[i].values.size() != first.values.size())
            throw ShapeError("channel_importance: attribution shape mismatch");

    // mean of the first three tensors
    std::vector<double> mean_vals(first.values.size(), 0.0);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < mean_vals.size(); ++i)
            mean_vals[i] += preictal_attrs[k].values[i] / 3.0;

    const std::size_t slice = first.n_coeffs * first.n_frames;
    ChannelImportance imp;
    imp.raw.resize(first.n_channels);
    for (std::size_t c = 0; c < first.n_channels; ++c) {
        const double* s = mean_vals.data() + c * slice;
        double mu = 0.0;
        for (std::size_t i = 0; i < slice; ++i) mu += s[i];
        mu /= static_cast<double>(slice);
        double var = 0.0;
        for (std::size_t i = 0; i < slice; ++i) var += (s[i] - mu) * (s[i] - mu);
        const double sigma = std::sqrt(var / static_cast<double>(slice));
        imp.raw[c] = sigma < 1e-12 ? 0.0 : mu / sigma;
    }
    imp.processed = postprocess_importance(imp.raw);
    return imp;
}

// ---- attribution artifact io ---------------------------------------------------

namespace {

constexpr char kAttMagic[8] = {'P', 'I', 'A', 'T', 'T', '0', '0', '1'};

template <typename T>
void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw FormatError("attribution file truncated: " + path);
    return v;
}

}  // namespace

void write_attribution_file(const std::vector<AttributionTensor>& attrs, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(kAttMagic, 8);
    put<std::uint32_t>(f, 1);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(attrs.size()));
    for (const auto& a : attrs) {
        put<double>(f, a.t_start);
        put<double>(f, a.f_input);
        put<double>(f, a.f_baseline);
        put<std::uint32_t>(f, static_cast<std::uint32_t>(a.n_permutations));
        put<std::uint64_t>(f, a.seed);
        put<std::uint32_t>(f, static_cast<std::uint32_t>(a.n_channels));
        put<std::uint32_t>(f, static_cast<std::uint32_t>(a.n_coeffs));
        put<std::uint32_t>(f, static_cast<std::uint32_t>(a.n_frames));
        f.write(reinterpret_cast<const char*>(a.values.data()),
                static_cast<std::streamsize>(a.values.size() * 8));
    }
    if (!f) throw IoError("short write: " + path);
}

std::vector<AttributionTensor> read_attribution_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open attribution file: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kAttMagic, 8) != 0)
        throw FormatError("attribution file: bad magic: " + path);
    const auto version = get<std::uint32_t>(f, path);
    if (version != 1) throw VersionError("attribution file: unsupported version");

    std::vector<AttributionTensor> out(get<std::uint32_t>(f, path));
    for (auto& a : out) {
        a.t_start = get<double>(f, path);
        a.f_input = get<double>(f, path);
        a.f_baseline = get<double>(f, path);
        a.n_permutations = static_cast<int>(get<std::uint32_t>(f, path));
        a.seed = get<std::uint64_t>(f, path);
        a.n_channels = get<std::uint32_t>(f, path);
        a.n_coeffs = get<std::uint32_t>(f, path);
        a.n_frames = get<std::uint32_t>(f, path);
        a.values.resize(a.n_channels * a.n_coeffs * a.n_frames);
        f.read(reinterpret_cast<char*>(a.values.data()),
               static_cast<std::streamsize>(a.values.size() * 8));
        if (!f) throw FormatError("attribution file truncated: " + path);
    }
    return out;
}

}  // namespace preictal
