#include "preictal/segment_cache.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace preictal {

namespace {

constexpr char kMagic[8] = {'P', 'I', 'S', 'E', 'G', '0', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, T v) {
    // little-endian host assumed; this toolkit targets x86-64/aarch64
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw FormatError("segment cache truncated: " + path);
    return v;
}

}  // namespace

void write_segment_cache(const std::vector<LabeledSegment>& segments,
                         const std::string& subject_id, int fs, double window_s,
                         const std::string& path) {
    const std::size_t len = static_cast<std::size_t>(std::llround(window_s * fs));
    for (const auto& s : segments) {
        for (const auto& row : s.data)
            if (row.size() != len)
                throw ShapeError("segment cache: segment row length != window_s * fs");
        if (!segments.empty() && s.data.size() != segments[0].data.size())
            throw ShapeError("segment cache: inconsistent channel counts");
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(kMagic, 8);
    put<std::uint32_t>(f, kVersion);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(subject_id.size()));
    f.write(subject_id.data(), static_cast<std::streamsize>(subject_id.size()));
    put<std::uint32_t>(f, static_cast<std::uint32_t>(fs));
    put<double>(f, window_s);
    const std::uint32_t channels = segments.empty() ? 0 : static_cast<std::uint32_t>(segments[0].data.size());
    put<std::uint32_t>(f, channels);
    put<std::uint64_t>(f, static_cast<std::uint64_t>(segments.size()));
    for (const auto& s : segments) {
        put<std::uint8_t>(f, static_cast<std::uint8_t>(s.label));
        put<double>(f, s.t_start);
    }
    for (const auto& s : segments)
        for (const auto& row : s.data)
            for (double v : row) put<float>(f, static_cast<float>(v));
    if (!f) throw IoError("short write: " + path);
}

SegmentCache read_segment_cache(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open segment cache: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("segment cache: bad magic: " + path);
    const auto version = get<std::uint32_t>(f, path);
    if (version != kVersion)
        throw VersionError("segment cache: unsupported version " + std::to_string(version));

    SegmentCache cache;
    const auto id_len = get<std::uint32_t>(f, path);
    cache.subject_id.resize(id_len);
    f.read(cache.subject_id.data(), id_len);
    if (!f) throw FormatError("segment cache truncated: " + path);
    cache.fs = static_cast<int>(get<std::uint32_t>(f, path));
    cache.window_s = get<double>(f, path);
    const auto channels = get<std::uint32_t>(f, path);
    const auto count = get<std::uint64_t>(f, path);
    const std::size_t len = static_cast<std::size_t>(std::llround(cache.window_s * cache.fs));

    cache.segments.resize(count);
    for (auto& s : cache.segments) {
        s.subject_id = cache.subject_id;
        s.label = static_cast<int>(get<std::uint8_t>(f, path));
        s.t_start = get<double>(f, path);
    }
    for (auto& s : cache.segments) {
        s.data.assign(channels, std::vector<double>(len));
        for (auto& row : s.data)
            for (double& v : row) v = static_cast<double>(get<float>(f, path));
    }
    return cache;
}

}  // namespace preictal
