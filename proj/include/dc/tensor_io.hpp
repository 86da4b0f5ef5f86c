#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dc/dc_image.hpp"
#include "dc/depth_image.hpp"
#include "dc/error.hpp"

namespace dc::io {

// On-disk tensor container: 8-byte magic, u32 rank, u32 dims[rank], then the
// row-major f64 payload. All integers and doubles are little-endian.
inline constexpr char kTensorMagic[8] = {'D', 'C', 'T', 'N', 'S', 'R', '0', '1'};
inline constexpr std::uint32_t kTensorMaxRank = 8;

namespace detail {

inline void put_u32_le(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64_le(std::string& buf, double d) {
    const auto u = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

inline double get_f64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

// Writes the whole buffer to a sibling temp file, then renames it over the
// target so readers never observe a half-written file.
inline void atomic_write(const std::filesystem::path& path, const std::string& buf) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    std::FILE* fp = std::fopen(tmp.string().c_str(), "wb");
    if (!fp) fail(ErrorKind::io, "cannot open '" + tmp.string() + "' for writing");
    const std::size_t written = std::fwrite(buf.data(), 1, buf.size(), fp);
    const bool flushed = std::fclose(fp) == 0;
    if (written != buf.size() || !flushed) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        fail(ErrorKind::io, "short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(ErrorKind::io, "cannot rename temp file onto '" + path.string() + "'");
    }
}

inline std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (!fp) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
    std::vector<unsigned char> buf;
    unsigned char chunk[65536];
    std::size_t got;
    while ((got = std::fread(chunk, 1, sizeof chunk, fp)) > 0) buf.insert(buf.end(), chunk, chunk + got);
    const bool err = std::ferror(fp) != 0;
    std::fclose(fp);
    if (err) fail(ErrorKind::io, "read error on '" + path.string() + "'");
    return buf;
}

}  // namespace detail

// Atomic plain-text writer for CSVs, manifests and the like.
inline void save_text(const std::filesystem::path& path, const std::string& text) {
    detail::atomic_write(path, text);
}

struct LoadedTensor {
    std::vector<std::uint32_t> dims;
    std::vector<double> data;
};

inline void save_tensor(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                        std::span<const double> data) {
    if (dims.empty() || dims.size() > kTensorMaxRank)
        fail(ErrorKind::invalid_input, "tensor rank must be between 1 and 8");
    std::size_t expected = 1;
    for (std::uint32_t d : dims) {
        if (d == 0) fail(ErrorKind::invalid_input, "tensor dimensions must be positive");
        expected *= d;
    }
    if (expected != data.size())
        fail(ErrorKind::invalid_input, "tensor payload does not match its dimensions");

    std::string buf;
    buf.reserve(8 + 4 + 4 * dims.size() + 8 * data.size());
    buf.append(kTensorMagic, sizeof kTensorMagic);
    detail::put_u32_le(buf, static_cast<std::uint32_t>(dims.size()));
    for (std::uint32_t d : dims) detail::put_u32_le(buf, d);
    for (double v : data) detail::put_f64_le(buf, v);
    detail::atomic_write(path, buf);
}

inline LoadedTensor load_tensor(const std::filesystem::path& path) {
    const std::vector<unsigned char> buf = detail::read_all(path);
    const std::string name = path.string();
    if (buf.size() < sizeof kTensorMagic + 4) fail(ErrorKind::format, "'" + name + "' is truncated");
    if (std::memcmp(buf.data(), kTensorMagic, sizeof kTensorMagic) != 0)
        fail(ErrorKind::format, "'" + name + "' is not a tensor file (bad magic)");

    std::size_t off = sizeof kTensorMagic;
    const std::uint32_t rank = detail::get_u32_le(buf.data() + off);
    off += 4;
    if (rank == 0 || rank > kTensorMaxRank)
        fail(ErrorKind::format, "'" + name + "' has unsupported rank");
    if (buf.size() < off + 4ull * rank) fail(ErrorKind::format, "'" + name + "' is truncated");

    LoadedTensor out;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t d = detail::get_u32_le(buf.data() + off);
        off += 4;
        if (d == 0) fail(ErrorKind::format, "'" + name + "' has a zero dimension");
        if (count > std::numeric_limits<std::size_t>::max() / d)
            fail(ErrorKind::format, "'" + name + "' dimensions overflow");
        count *= d;
        out.dims.push_back(d);
    }
    if (buf.size() != off + 8 * count)
        fail(ErrorKind::format, "'" + name + "' payload size does not match its dimensions");
    out.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) out.data[i] = detail::get_f64_le(buf.data() + off + 8 * i);
    return out;
}

// Depth maps travel as rank-2 tensors with 0 marking missing pixels.
inline void save_depth_tensor(const std::filesystem::path& path, const DepthImage& img) {
    std::vector<double> data(static_cast<std::size_t>(img.height()) * img.width(), 0.0);
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            if (img.present(r, c)) data[static_cast<std::size_t>(r) * img.width() + c] = img.at(r, c);
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(img.height()),
                                   static_cast<std::uint32_t>(img.width())};
    save_tensor(path, dims, data);
}

inline DepthImage load_depth_tensor(const std::filesystem::path& path) {
    LoadedTensor t = load_tensor(path);
    if (t.dims.size() != 2)
        fail(ErrorKind::format, "'" + path.string() + "' is not a depth map (expected rank 2)");
    DepthImage img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    std::size_t i = 0;
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c, ++i)
            if (t.data[i] != 0.0) img.set(r, c, t.data[i]);
    return img;
}

// Coefficient images travel as rank-3 (height, width, bins) tensors; the bin
// grid itself is not stored and must be supplied on load.
inline void save_dc_tensor(const std::filesystem::path& path, const DCImage& img) {
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(img.height()),
                                   static_cast<std::uint32_t>(img.width()),
                                   static_cast<std::uint32_t>(img.grid().n_bins())};
    save_tensor(path, dims, img.data());
}

inline DCImage load_dc_tensor(const std::filesystem::path& path, const BinGrid& grid) {
    LoadedTensor t = load_tensor(path);
    if (t.dims.size() != 3)
        fail(ErrorKind::format, "'" + path.string() + "' is not a coefficient image (expected rank 3)");
    if (static_cast<int>(t.dims[2]) != grid.n_bins())
        fail(ErrorKind::invalid_input, "'" + path.string() + "' has " + std::to_string(t.dims[2]) +
                                           " bins but the grid expects " + std::to_string(grid.n_bins()));
    DCImage img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), grid);
    img.data() = std::move(t.data);
    return img;
}

}  // namespace dc::io
