#include "preictal/signal_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "preictal/rng.hpp"

namespace preictal {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string field(const std::vector<std::uint8_t>& bytes, std::size_t off, std::size_t len) {
    return trim(std::string(reinterpret_cast<const char*>(bytes.data()) + off, len));
}

double parse_num(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw ParseError(std::string("EDF header: trailing junk in ") + what + ": '" + s + "'");
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError(std::string("EDF header: cannot parse ") + what + ": '" + s + "'");
    }
}

long parse_int(const std::string& s, const char* what) {
    double v = parse_num(s, what);
    long i = std::lround(v);
    if (std::fabs(v - static_cast<double>(i)) > 1e-9)
        throw ParseError(std::string("EDF header: expected integer for ") + what + ": '" + s + "'");
    return i;
}

// fixed-width ASCII field, space padded, truncated if necessary
void put_field(std::string& out, const std::string& value, std::size_t len) {
    std::string v = value.substr(0, len);
    v.resize(len, ' ');
    out += v;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return buf;
}

}  // namespace

int Recording::channel_index(const std::string& label) const {
    for (std::size_t i = 0; i < electrodes.size(); ++i)
        if (electrodes[i] == label) return static_cast<int>(i);
    return -1;
}

void Recording::validate() const {
    if (fs <= 0) throw ParseError("recording: fs must be a positive integer");
    if (electrodes.size() != data.size())
        throw ParseError("recording: electrode label count != data row count");
    for (std::size_t i = 0; i < electrodes.size(); ++i)
        for (std::size_t j = i + 1; j < electrodes.size(); ++j)
            if (electrodes[i] == electrodes[j])
                throw ParseError("recording: duplicate electrode label '" + electrodes[i] + "'");
    const std::size_t n = n_samples();
    for (std::size_t c = 0; c < data.size(); ++c) {
        if (data[c].size() != n) throw ParseError("recording: ragged channel lengths");
        for (double v : data[c])
            if (!std::isfinite(v)) throw ParseError("recording: non-finite sample in '" + electrodes[c] + "'");
    }
}

// ---- EDF ------------------------------------------------------------------

Recording parse_edf(const std::vector<std::uint8_t>& bytes,
                    const std::string& subject_id,
                    ParseReport* report) {
    if (bytes.size() < 256) throw ParseError("EDF: file shorter than fixed header (256 bytes)");

    const long n_records_hdr = parse_int(field(bytes, 236, 8), "number of data records");
    const double record_dur = parse_num(field(bytes, 244, 8), "record duration");
    const long ns = parse_int(field(bytes, 252, 4), "number of signals");
    if (ns <= 0) throw ParseError("EDF: number of signals must be positive");
    if (record_dur <= 0) throw ParseError("EDF: record duration must be positive");

    const std::size_t header_bytes = 256 + static_cast<std::size_t>(ns) * 256;
    const long declared_header = parse_int(field(bytes, 184, 8), "header byte count");
    if (static_cast<std::size_t>(declared_header) != header_bytes)
        throw ParseError("EDF: declared header size " + std::to_string(declared_header) +
                         " != expected " + std::to_string(header_bytes));
    if (bytes.size() < header_bytes) throw ParseError("EDF: truncated signal header");

    // per-signal fields are stored field-major after the fixed header
    std::size_t off = 256;
    std::vector<std::string> labels(ns);
    for (long s = 0; s < ns; ++s) labels[s] = field(bytes, off + s * 16, 16);
    off += static_cast<std::size_t>(ns) * 16;   // labels
    off += static_cast<std::size_t>(ns) * 80;   // transducer type
    off += static_cast<std::size_t>(ns) * 8;    // physical dimension
    std::vector<double> phys_min(ns), phys_max(ns), dig_min(ns), dig_max(ns);
    for (long s = 0; s < ns; ++s) phys_min[s] = parse_num(field(bytes, off + s * 8, 8), "physical min");
    off += static_cast<std::size_t>(ns) * 8;
    for (long s = 0; s < ns; ++s) phys_max[s] = parse_num(field(bytes, off + s * 8, 8), "physical max");
    off += static_cast<std::size_t>(ns) * 8;
    for (long s = 0; s < ns; ++s) dig_min[s] = parse_num(field(bytes, off + s * 8, 8), "digital min");
    off += static_cast<std::size_t>(ns) * 8;
    for (long s = 0; s < ns; ++s) dig_max[s] = parse_num(field(bytes, off + s * 8, 8), "digital max");
    off += static_cast<std::size_t>(ns) * 8;
    off += static_cast<std::size_t>(ns) * 80;   // prefiltering
    std::vector<long> spr(ns);
    for (long s = 0; s < ns; ++s) spr[s] = parse_int(field(bytes, off + s * 8, 8), "samples per record");
    off += static_cast<std::size_t>(ns) * 8;
    off += static_cast<std::size_t>(ns) * 32;   // reserved

    for (long s = 0; s < ns; ++s) {
        if (dig_max[s] == dig_min[s])
            throw ParseError("EDF: digital max == digital min for signal '" + labels[s] + "'");
        if (spr[s] <= 0)
            throw ParseError("EDF: non-positive samples per record for signal '" + labels[s] + "'");
    }
    // one common sampling rate is required downstream; mixed-rate files are
    // rejected rather than resampled
    for (long s = 1; s < ns; ++s)
        if (spr[s] != spr[0])
            throw ParseError("EDF: signals have mismatched samples per record (" +
                             std::to_string(spr[0]) + " vs " + std::to_string(spr[s]) +
                             " for '" + labels[s] + "'); resampling is not supported");

    const double fs_d = static_cast<double>(spr[0]) / record_dur;
    const int fs = static_cast<int>(std::lround(fs_d));
    if (fs <= 0 || std::fabs(fs_d - fs) > 1e-6)
        throw ParseError("EDF: sampling rate " + std::to_string(fs_d) + " is not a positive integer");

    const std::size_t record_bytes = static_cast<std::size_t>(ns) * spr[0] * 2;
    const std::size_t avail = bytes.size() - header_bytes;
    std::size_t n_records = avail / record_bytes;
    if (n_records_hdr >= 0 && static_cast<std::size_t>(n_records_hdr) < n_records)
        n_records = static_cast<std::size_t>(n_records_hdr);
    if (avail % record_bytes != 0 && report)
        report->warnings.push_back("EDF: truncated final data record dropped (" +
                                   std::to_string(avail % record_bytes) + " trailing bytes)");
    if (n_records_hdr >= 0 && static_cast<std::size_t>(n_records_hdr) > n_records && report)
        report->warnings.push_back("EDF: header declares " + std::to_string(n_records_hdr) +
                                   " records but only " + std::to_string(n_records) + " are present");

    Recording r;
    r.subject_id = subject_id.empty() ? field(bytes, 8, 80) : subject_id;
    r.fs = fs;
    r.electrodes = labels;
    r.data.assign(ns, std::vector<double>(n_records * spr[0]));

    const std::uint8_t* p = bytes.data() + header_bytes;
    for (std::size_t rec = 0; rec < n_records; ++rec) {
        for (long s = 0; s < ns; ++s) {
            const double scale = (phys_max[s] - phys_min[s]) / (dig_max[s] - dig_min[s]);
            double* dst = r.data[s].data() + rec * spr[0];
            for (long k = 0; k < spr[0]; ++k) {
                std::int16_t d = static_cast<std::int16_t>(
                    static_cast<std::uint16_t>(p[0]) | (static_cast<std::uint16_t>(p[1]) << 8));
                p += 2;
                dst[k] = (static_cast<double>(d) - dig_min[s]) * scale + phys_min[s];
            }
        }
    }
    r.validate();
    return r;
}

Recording parse_edf_file(const std::string& path, const std::string& subject_id, ParseReport* report) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open EDF file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return parse_edf(bytes, subject_id, report);
}

namespace {

struct ChannelScale {
    double phys_min, phys_max;
    double step() const { return (phys_max - phys_min) / 65535.0; }
};

ChannelScale channel_scale(const std::vector<double>& x) {
    double lo = 0.0, hi = 0.0;
    if (!x.empty()) {
        lo = *std::min_element(x.begin(), x.end());
        hi = *std::max_element(x.begin(), x.end());
    }
    if (hi - lo < 1e-12) {  // constant channel: widen so the scale is usable
        lo -= 0.5;
        hi += 0.5;
    }
    return {lo, hi};
}

}  // namespace

std::vector<std::uint8_t> write_edf(const Recording& r) {
    r.validate();
    const long ns = static_cast<long>(r.n_channels());
    if (ns == 0) throw ConfigError("write_edf: recording has no channels");
    const std::size_t n = r.n_samples();
    if (n % static_cast<std::size_t>(r.fs) != 0)
        throw ConfigError("write_edf: sample count must be a whole number of 1 s records");
    const std::size_t n_records = n / r.fs;
    const long spr = r.fs;

    std::vector<ChannelScale> sc(ns);
    for (long s = 0; s < ns; ++s) sc[s] = channel_scale(r.data[s]);

    std::string h;
    h.reserve(256 + ns * 256);
    put_field(h, "0", 8);
    put_field(h, r.subject_id, 80);
    put_field(h, "preictal synthetic recording", 80);
    put_field(h, "01.01.00", 8);  // fixed date/time keeps output deterministic
    put_field(h, "00.00.00", 8);
    put_field(h, std::to_string(256 + ns * 256), 8);
    put_field(h, "", 44);
    put_field(h, std::to_string(n_records), 8);
    put_field(h, "1", 8);
    put_field(h, std::to_string(ns), 4);
    for (long s = 0; s < ns; ++s) put_field(h, r.electrodes[s], 16);
    for (long s = 0; s < ns; ++s) put_field(h, "synthetic", 80);
    for (long s = 0; s < ns; ++s) put_field(h, "uV", 8);
    for (long s = 0; s < ns; ++s) put_field(h, fmt_double(sc[s].phys_min), 8);
    for (long s = 0; s < ns; ++s) put_field(h, fmt_double(sc[s].phys_max), 8);
    for (long s = 0; s < ns; ++s) put_field(h, "-32768", 8);
    for (long s = 0; s < ns; ++s) put_field(h, "32767", 8);
    for (long s = 0; s < ns; ++s) put_field(h, "", 80);
    for (long s = 0; s < ns; ++s) put_field(h, std::to_string(spr), 8);
    for (long s = 0; s < ns; ++s) put_field(h, "", 32);

    std::vector<std::uint8_t> out(h.begin(), h.end());
    out.reserve(out.size() + n_records * ns * spr * 2);
    for (std::size_t rec = 0; rec < n_records; ++rec) {
        for (long s = 0; s < ns; ++s) {
            const double inv = 65535.0 / (sc[s].phys_max - sc[s].phys_min);
            const double* src = r.data[s].data() + rec * spr;
            for (long k = 0; k < spr; ++k) {
                double d = (src[k] - sc[s].phys_min) * inv - 32768.0;
                long q = std::lround(d);
                q = std::clamp(q, -32768L, 32767L);
                const std::uint16_t u = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
                out.push_back(static_cast<std::uint8_t>(u & 0xff));
                out.push_back(static_cast<std::uint8_t>(u >> 8));
            }
        }
    }
    return out;
}

void write_edf_file(const Recording& r, const std::string& path) {
    const std::vector<std::uint8_t> bytes = write_edf(r);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write: " + path);
}

double edf_quantization_step(const Recording& r) {
    double worst = 0.0;
    for (const auto& ch : r.data) worst = std::max(worst, channel_scale(ch).step());
    return worst;
}

// ---- annotation CSV ---------------------------------------------------------

AnnotationSet parse_annotations_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("annotations: empty file");
    if (trim(line) != "expert,onset_s,offset_s")
        throw ParseError("annotations: expected header 'expert,onset_s,offset_s', got '" + trim(line) + "'");

    AnnotationSet ann;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        std::size_t c1 = t.find(',');
        std::size_t c2 = (c1 == std::string::npos) ? std::string::npos : t.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw ParseError("annotations: line " + std::to_string(lineno) + ": expected 3 fields");
        const std::string expert = trim(t.substr(0, c1));
        SeizureInterval iv;
        iv.onset_s = parse_num(trim(t.substr(c1 + 1, c2 - c1 - 1)), "onset_s");
        iv.offset_s = parse_num(trim(t.substr(c2 + 1)), "offset_s");
        if (!(iv.onset_s >= 0.0 && iv.onset_s < iv.offset_s))
            throw ParseError("annotations: line " + std::to_string(lineno) +
                             ": need 0 <= onset < offset");
        std::size_t e = 0;
        for (; e < ann.expert_ids.size(); ++e)
            if (ann.expert_ids[e] == expert) break;
        if (e == ann.expert_ids.size()) {
            ann.expert_ids.push_back(expert);
            ann.intervals.emplace_back();
        }
        ann.intervals[e].push_back(iv);
    }
    for (std::size_t e = 0; e < ann.intervals.size(); ++e) {
        auto& iv = ann.intervals[e];
        std::sort(iv.begin(), iv.end(),
                  [](const SeizureInterval& a, const SeizureInterval& b) { return a.onset_s < b.onset_s; });
        for (std::size_t i = 1; i < iv.size(); ++i)
            if (iv[i].onset_s < iv[i - 1].offset_s)
                throw ParseError("annotations: expert '" + ann.expert_ids[e] +
                                 "' has overlapping intervals");
    }
    return ann;
}

AnnotationSet read_annotations_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open annotations file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_annotations_csv(text);
}

std::string format_annotations_csv(const AnnotationSet& ann) {
    std::ostringstream out;
    out << "expert,onset_s,offset_s\n";
    char buf[64];
    for (std::size_t e = 0; e < ann.n_experts(); ++e) {
        for (const auto& iv : ann.intervals[e]) {
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", ann.expert_ids[e].c_str(),
                          iv.onset_s, iv.offset_s);
            out << buf;
        }
    }
    return out.str();
}

void write_annotations_file(const AnnotationSet& ann, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << format_annotations_csv(ann);
}

// ---- consensus ---------------------------------------------------------------

namespace {

// union of possibly-touching sorted intervals
std::vector<SeizureInterval> merge_union(std::vector<SeizureInterval> iv) {
    std::sort(iv.begin(), iv.end(),
              [](const SeizureInterval& a, const SeizureInterval& b) { return a.onset_s < b.onset_s; });
    std::vector<SeizureInterval> out;
    for (const auto& x : iv) {
        if (!out.empty() && x.onset_s <= out.back().offset_s)
            out.back().offset_s = std::max(out.back().offset_s, x.offset_s);
        else
            out.push_back(x);
    }
    return out;
}

std::vector<SeizureInterval> intersect(const std::vector<SeizureInterval>& a,
                                       const std::vector<SeizureInterval>& b) {
    std::vector<SeizureInterval> out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double lo = std::max(a[i].onset_s, b[j].onset_s);
        const double hi = std::min(a[i].offset_s, b[j].offset_s);
        if (lo < hi) out.push_back({lo, hi});
        if (a[i].offset_s < b[j].offset_s)
            ++i;
        else
            ++j;
    }
    return out;
}

}  // namespace

std::vector<SeizureInterval> consensus_intervals(const AnnotationSet& ann, double min_overlap_s) {
    if (ann.n_experts() != 3)
        throw ConfigError("consensus_intervals: expected exactly 3 expert annotation lists, got " +
                          std::to_string(ann.n_experts()));
    for (const auto& iv : ann.intervals)
        if (iv.empty()) return {};

    std::vector<SeizureInterval> acc = merge_union(ann.intervals[0]);
    acc = intersect(acc, merge_union(ann.intervals[1]));
    acc = intersect(acc, merge_union(ann.intervals[2]));

    std::vector<SeizureInterval> out;
    for (const auto& iv : acc)
        if (iv.duration() >= min_overlap_s) out.push_back(iv);
    return out;
}

// ---- synthetic recordings -----------------------------------------------------

std::pair<Recording, AnnotationSet> synth_record(const SynthConfig& cfg, const std::string& subject_id) {
    if (cfg.fs <= 0) throw ConfigError("synth_record: fs must be positive");
    if (cfg.duration_s <= 0) throw ConfigError("synth_record: duration must be positive");
    for (const auto& iv : cfg.seizure_intervals)
        if (!(iv.onset_s >= 0 && iv.offset_s <= cfg.duration_s && iv.onset_s < iv.offset_s))
            throw ConfigError("synth_record: seizure interval outside recording");

    std::vector<std::string> electrodes = cfg.electrodes;
    if (electrodes.empty())
        electrodes = {"Fp1", "Fp2", "T3", "T4", "C3", "C4", "Cz", "O1", "O2", "ECG"};

    const std::size_t n = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.fs));
    Recording r;
    r.subject_id = subject_id;
    r.fs = cfg.fs;
    r.electrodes = electrodes;
    r.data.assign(electrodes.size(), std::vector<double>(n));

    Rng root(cfg.seed);
    std::vector<double> rms(electrodes.size(), 0.0);
    for (std::size_t c = 0; c < electrodes.size(); ++c) {
        Rng rng = root.split(c);
        // Paul Kellet's economy pink filter over white noise
        double b0 = 0.0, b1 = 0.0, b2 = 0.0, sumsq = 0.0;
        auto& ch = r.data[c];
        for (std::size_t i = 0; i < n; ++i) {
            const double w = rng.normal();
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            ch[i] = (b0 + b1 + b2 + w * 0.1848) * cfg.background_scale;
            sumsq += ch[i] * ch[i];
        }
        rms[c] = n > 0 ? std::sqrt(sumsq / static_cast<double>(n)) : 0.0;
    }

    for (std::size_t k = 0; k < cfg.seizure_intervals.size(); ++k) {
        const auto& iv = cfg.seizure_intervals[k];
        Rng rng = root.split(2000 + k);
        const double f = rng.uniform(2.0, 4.0);
        const double burst_start = std::max(0.0, iv.onset_s - cfg.preictal_lead_s);
        const std::size_t i0 = static_cast<std::size_t>(std::llround(burst_start * cfg.fs));
        const std::size_t i1 = std::min(n, static_cast<std::size_t>(std::llround(iv.offset_s * cfg.fs)));
        for (std::size_t c = 0; c < electrodes.size(); ++c) {
            const double phase = rng.uniform(0.0, 6.283185307179586);
            const double amp = cfg.burst_gain * rms[c];
            for (std::size_t i = i0; i < i1; ++i) {
                const double t = static_cast<double>(i) / cfg.fs;
                r.data[c][i] += amp * std::sin(6.283185307179586 * f * t + phase);
            }
        }
    }

    AnnotationSet ann;
    if (!cfg.seizure_intervals.empty()) {
        ann.expert_ids = {"A", "B", "C"};
        ann.intervals.assign(3, {});
        for (std::size_t e = 0; e < 3; ++e) {
            Rng rng = root.split(1000 + e);
            for (const auto& iv : cfg.seizure_intervals) {
                double a = iv.onset_s + rng.uniform(0.0, cfg.annotation_jitter_s);
                double b = iv.offset_s - rng.uniform(0.0, cfg.annotation_jitter_s);
                if (b - a < 0.5) {  // keep degenerate jitters valid
                    a = iv.onset_s;
                    b = iv.offset_s;
                }
                ann.intervals[e].push_back({a, b});
            }
        }
    }
    return {std::move(r), std::move(ann)};
}

}  // namespace preictal
