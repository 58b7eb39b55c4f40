#include "preictal/mfcc.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "preictal/fft.hpp"

namespace preictal {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

void MfccConfig::validate(int fs) const {
    if (frame_len <= 0 || (frame_len & (frame_len - 1)) != 0)
        throw ConfigError("mfcc: frame_len must be a power of two");
    if (hop <= 0 || hop > frame_len) throw ConfigError("mfcc: need 0 < hop <= frame_len");
    if (n_mels <= 0) throw ConfigError("mfcc: n_mels must be positive");
    if (n_mfcc <= 0 || n_mfcc > n_mels) throw ConfigError("mfcc: need 0 < n_mfcc <= n_mels");
    if (!(0.0 < fmin && fmin < fmax)) throw ConfigError("mfcc: need 0 < fmin < fmax");
    if (fmax >= fs / 2.0)
        throw ConfigError("mfcc: fmax " + std::to_string(fmax) + " must be below Nyquist of fs=" +
                          std::to_string(fs));
    if (log_floor <= 0.0) throw ConfigError("mfcc: log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> frame_signal(const std::vector<double>& x, const MfccConfig& cfg) {
    const std::size_t n = x.size();
    if (n < static_cast<std::size_t>(cfg.hop))
        throw LengthError("frame_signal: signal shorter than hop");

    const std::size_t flen = static_cast<std::size_t>(cfg.frame_len);
    const std::size_t pad = flen / 2;
    // reflect padding without repeating the edge sample: index -k -> x[k]
    auto sample = [&](std::ptrdiff_t i) -> double {
        if (i < 0) i = -i;
        const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(n) - 1;
        if (i > last) i = 2 * last - i;
        return x[static_cast<std::size_t>(i)];
    };

    std::vector<double> window(flen);
    for (std::size_t k = 0; k < flen; ++k)
        window[k] = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(k) /
                                           static_cast<double>(flen - 1));

    const std::size_t n_frames = 1 + n / static_cast<std::size_t>(cfg.hop);
    std::vector<std::vector<double>> frames(n_frames, std::vector<double>(flen));
    for (std::size_t t = 0; t < n_frames; ++t) {
        const std::ptrdiff_t start =
            static_cast<std::ptrdiff_t>(t * static_cast<std::size_t>(cfg.hop)) -
            static_cast<std::ptrdiff_t>(pad);
        for (std::size_t k = 0; k < flen; ++k)
            frames[t][k] = sample(start + static_cast<std::ptrdiff_t>(k)) * window[k];
    }
    return frames;
}

MelFilterbank build_mel_filterbank(const MfccConfig& cfg, int fs) {
    cfg.validate(fs);
    const int n_bins = cfg.frame_len / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);

    // n_mels + 2 equally mel-spaced points; triangle m spans points m-1..m+1
    std::vector<double> points(cfg.n_mels + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        points[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

    MelFilterbank fb;
    fb.center_freqs.assign(points.begin() + 1, points.end() - 1);
    fb.weights.assign(cfg.n_mels, std::vector<double>(n_bins, 0.0));
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double left = points[m], center = points[m + 1], right = points[m + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * fs / cfg.frame_len;
            double wgt = 0.0;
            if (f > left && f < center)
                wgt = (f - left) / (center - left);
            else if (f == center)
                wgt = 1.0;
            else if (f > center && f < right)
                wgt = (right - f) / (right - center);
            fb.weights[m][k] = wgt;
        }
    }
    return fb;
}

std::vector<double> dct2_orthonormal(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> y(n, 0.0);
    const double s0 = std::sqrt(1.0 / static_cast<double>(n));
    const double s = std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += x[i] * std::cos(kPi * (2.0 * i + 1.0) * k / (2.0 * n));
        y[k] = acc * (k == 0 ? s0 : s);
    }
    return y;
}

std::vector<std::vector<double>> mfcc_channel(const std::vector<double>& x, const MfccConfig& cfg,
                                              const MelFilterbank& fb) {
    const auto frames = frame_signal(x, cfg);
    const Fft fft(static_cast<std::size_t>(cfg.frame_len));

    std::vector<std::vector<double>> out(cfg.n_mfcc, std::vector<double>(frames.size()));
    std::vector<double> energies(cfg.n_mels);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const std::vector<double> mag = fft.magnitude(frames[t]);
        for (int m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            const auto& w = fb.weights[m];
            for (std::size_t k = 0; k < mag.size(); ++k) e += w[k] * mag[k];
            energies[m] = std::log(std::max(e, cfg.log_floor));
        }
        const std::vector<double> coeffs = dct2_orthonormal(energies);
        for (int m = 0; m < cfg.n_mfcc; ++m) out[m][t] = coeffs[m];
    }
    return out;
}

MfccTensor featurize_segment(const LabeledSegment& s, const MfccConfig& cfg, int fs,
                             const MelFilterbank& fb) {
    if (s.data.empty()) throw ShapeError("featurize_segment: segment has no channels");
    const std::size_t len = s.data[0].size();
    for (const auto& row : s.data)
        if (row.size() != len) throw ShapeError("featurize_segment: ragged channel lengths");
    cfg.validate(fs);

    MfccTensor t;
    t.subject_id = s.subject_id;
    t.label = s.label;
    t.t_start = s.t_start;
    t.n_channels = s.data.size();
    t.n_coeffs = static_cast<std::size_t>(cfg.n_mfcc);
    t.n_frames = 1 + len / static_cast<std::size_t>(cfg.hop);
    t.values.resize(t.n_channels * t.n_coeffs * t.n_frames);
    for (std::size_t c = 0; c < t.n_channels; ++c) {
        const auto coeffs = mfcc_channel(s.data[c], cfg, fb);
        for (std::size_t m = 0; m < t.n_coeffs; ++m)
            for (std::size_t f = 0; f < t.n_frames; ++f) t.at(c, m, f) = coeffs[m][f];
    }
    return t;
}

// ---- feature cache ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'P', 'I', 'F', 'E', 'A', '0', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw FormatError("feature cache truncated: " + path);
    return v;
}

}  // namespace

void write_feature_cache(const std::vector<MfccTensor>& tensors, const std::string& subject_id,
                         const std::string& path) {
    for (const auto& t : tensors)
        if (!tensors.empty() && (t.n_channels != tensors[0].n_channels ||
                                 t.n_coeffs != tensors[0].n_coeffs ||
                                 t.n_frames != tensors[0].n_frames))
            throw ShapeError("feature cache: inconsistent tensor shapes");

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(kMagic, 8);
    put<std::uint32_t>(f, kVersion);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(subject_id.size()));
    f.write(subject_id.data(), static_cast<std::streamsize>(subject_id.size()));
    const std::uint32_t c = tensors.empty() ? 0 : static_cast<std::uint32_t>(tensors[0].n_channels);
    const std::uint32_t m = tensors.empty() ? 0 : static_cast<std::uint32_t>(tensors[0].n_coeffs);
    const std::uint32_t fr = tensors.empty() ? 0 : static_cast<std::uint32_t>(tensors[0].n_frames);
    put<std::uint32_t>(f, c);
    put<std::uint32_t>(f, m);
    put<std::uint32_t>(f, fr);
    put<std::uint64_t>(f, static_cast<std::uint64_t>(tensors.size()));
    for (const auto& t : tensors) {
        put<std::uint8_t>(f, static_cast<std::uint8_t>(t.label));
        put<double>(f, t.t_start);
    }
    for (const auto& t : tensors)
        for (double v : t.values) put<float>(f, static_cast<float>(v));
    if (!f) throw IoError("short write: " + path);
}

FeatureCache read_feature_cache(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open feature cache: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("feature cache: bad magic: " + path);
    const auto version = get<std::uint32_t>(f, path);
    if (version != kVersion)
        throw VersionError("feature cache: unsupported version " + std::to_string(version));

    FeatureCache cache;
    const auto id_len = get<std::uint32_t>(f, path);
    cache.subject_id.resize(id_len);
    f.read(cache.subject_id.data(), id_len);
    if (!f) throw FormatError("feature cache truncated: " + path);
    const auto c = get<std::uint32_t>(f, path);
    const auto m = get<std::uint32_t>(f, path);
    const auto fr = get<std::uint32_t>(f, path);
    const auto count = get<std::uint64_t>(f, path);

    cache.tensors.resize(count);
    for (auto& t : cache.tensors) {
        t.subject_id = cache.subject_id;
        t.n_channels = c;
        t.n_coeffs = m;
        t.n_frames = fr;
        t.label = static_cast<int>(get<std::uint8_t>(f, path));
        t.t_start = get<double>(f, path);
    }
    for (auto& t : cache.tensors) {
        t.values.resize(static_cast<std::size_t>(c) * m * fr);
        for (double& v : t.values) v = static_cast<double>(get<float>(f, path));
    }
    return cache;
}

}  // namespace preictal
