#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace openbox {

struct Dataset {
    Matrix x;
    std::vector<int> y;

    std::size_t size() const { return x.rows(); }
    std::size_t dim() const { return x.cols(); }
};

/// Two-dimensional synthetic binary problem: inputs sampled uniformly inside
/// a convex quadrangle, labeled by which side of a sine-shaped boundary they
/// fall on. Small enough to plot, curved enough that a linear model cannot
/// solve it.
inline Dataset gen_syn(std::size_t n, std::uint64_t seed) {
    // Convex quadrangle, counter-clockwise.
    static constexpr std::array<std::array<double, 2>, 4> corners{
        {{0.0, 0.0}, {4.0, 0.0}, {5.0, 3.0}, {1.0, 4.0}}};
    const auto inside = [](double px, double py) {
        for (std::size_t i = 0; i < corners.size(); ++i) {
            const auto& a = corners[i];
            const auto& b = corners[(i + 1) % corners.size()];
            const double cross = (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
            if (cross < 0.0) return false;
        }
        return true;
    };

    Rng rng(seed);
    Dataset d;
    d.x = Matrix(n, 2);
    d.y.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double px, py;
        do {
            px = rng.uniform(0.0, 5.0);
            py = rng.uniform(0.0, 4.0);
        } while (!inside(px, py));
        d.x(i, 0) = px;
        d.x(i, 1) = py;
        d.y.push_back(py > 1.5 + 0.8 * std::sin(1.7 * px) ? 1 : 0);
    }
    return d;
}

/// Unsigned-byte tensor in IDX layout (big-endian header, raw payload).
struct IdxTensor {
    std::vector<std::size_t> dims;
    std::vector<std::uint8_t> data;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        return n;
    }
};

inline void write_idx(const IdxTensor& t, const std::filesystem::path& path) {
    if (t.dims.empty() || t.dims.size() > 255)
        throw DataError("IDX tensor needs between 1 and 255 dimensions");
    if (t.element_count() != t.data.size())
        throw DataError("IDX tensor dims do not match payload size");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    const auto put_u32 = [&out](std::uint32_t v) {
        const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                                    static_cast<char>(v >> 8), static_cast<char>(v)};
        out.write(b.data(), 4);
    };
    // Magic: two zero bytes, type 0x08 (unsigned byte), dimension count.
    put_u32(0x00000800u | static_cast<std::uint32_t>(t.dims.size()));
    for (const std::size_t d : t.dims) put_u32(static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

inline IdxTensor read_idx(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const auto get_u32 = [&in, &path]() -> std::uint32_t {
        std::array<unsigned char, 4> b{};
        in.read(reinterpret_cast<char*>(b.data()), 4);
        if (!in) throw ParseError(path.string() + ": truncated IDX header");
        return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
               (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
    };
    const std::uint32_t magic = get_u32();
    if ((magic & 0xffffff00u) != 0x00000800u)
        throw ParseError(path.string() + ": not an unsigned-byte IDX file");
    const std::size_t ndim = magic & 0xffu;
    if (ndim == 0) throw ParseError(path.string() + ": IDX header has zero dimensions");
    IdxTensor t;
    std::size_t total = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        t.dims.push_back(get_u32());
        total *= t.dims.back();
        if (total > (std::size_t{1} << 33))
            throw ParseError(path.string() + ": IDX header promises an unreasonable size");
    }
    t.data.resize(t.element_count());
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(t.data.size()))
        throw ParseError(path.string() + ": IDX payload shorter than header promises");
    return t;
}

/// One split of a two-class image problem read from a pair of IDX files:
/// keep only the two requested original labels, mapped to 0 (class_a) and
/// 1 (class_b), pixels scaled to [0,1], at most `cap` instances per class
/// in file order.
inline Dataset load_idx_pair_split(const std::filesystem::path& images_path,
                                   const std::filesystem::path& labels_path, int class_a,
                                   int class_b, std::size_t cap) {
    const IdxTensor images = read_idx(images_path);
    const IdxTensor labels = read_idx(labels_path);
    if (images.dims.size() != 3)
        throw ParseError(images_path.string() + ": expected a 3-dimensional image tensor");
    if (labels.dims.size() != 1)
        throw ParseError(labels_path.string() + ": expected a 1-dimensional label tensor");
    if (images.dims[0] != labels.dims[0])
        throw DataError(images_path.string() + ": image/label counts disagree");

    const std::size_t d = images.dims[1] * images.dims[2];
    std::vector<std::size_t> pick;
    std::size_t count_a = 0, count_b = 0;
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
        const int lab = labels.data[i];
        if (lab == class_a && count_a < cap) {
            pick.push_back(i);
            ++count_a;
        } else if (lab == class_b && count_b < cap) {
            pick.push_back(i);
            ++count_b;
        }
    }
    if (count_a == 0 || count_b == 0)
        throw DataError(labels_path.string() + ": a requested class has no instances");

    Dataset out;
    out.x = Matrix(pick.size(), d);
    out.y.reserve(pick.size());
    for (std::size_t r = 0; r < pick.size(); ++r) {
        const std::uint8_t* src = images.data.data() + pick[r] * d;
        auto dst = out.x.row(r);
        for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<double>(src[j]) / 255.0;
        out.y.push_back(labels.data[pick[r]] == class_a ? 0 : 1);
    }
    return out;
}

struct PairSplits {
    Dataset train;
    Dataset test;
};

/// Standard file layout: train-images-idx3-ubyte / train-labels-idx1-ubyte
/// and the t10k-* pair for the test split.
inline PairSplits load_fmnist_pair(const std::filesystem::path& dir, int class_a, int class_b,
                                   std::size_t train_cap = 4000, std::size_t test_cap = 3000) {
    PairSplits s;
    s.train = load_idx_pair_split(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte",
                                  class_a, class_b, train_cap);
    s.test = load_idx_pair_split(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte",
                                 class_a, class_b, test_cap);
    if (s.train.dim() != s.test.dim())
        throw DataError("train and test splits have different image sizes");
    return s;
}

/// Compact binary dataset cache. Layout, all little-endian: the magic bytes
/// "OBX1", u32 instance count, u32 dimension, count*dim float64 features in
/// row-major order, then count u8 labels.
inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    for (const int label : d.y)
        if (label < 0 || label > 255) throw DataError("dataset cache labels must fit in a byte");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out.write("OBX1", 4);
    const auto put_u32 = [&out](std::uint32_t v) {
        std::array<char, 4> b{};
        std::memcpy(b.data(), &v, 4);
        out.write(b.data(), 4);
    };
    put_u32(static_cast<std::uint32_t>(d.size()));
    put_u32(static_cast<std::uint32_t>(d.dim()));
    out.write(reinterpret_cast<const char*>(d.x.data().data()),
              static_cast<std::streamsize>(d.x.data().size() * sizeof(double)));
    std::vector<std::uint8_t> labels(d.y.begin(), d.y.end());
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (!in || std::memcmp(magic.data(), "OBX1", 4) != 0)
        throw ParseError(path.string() + ": not a dataset cache (bad magic)");
    const auto get_u32 = [&in, &path]() -> std::uint32_t {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        if (!in) throw ParseError(path.string() + ": truncated dataset header");
        return v;
    };
    const std::uint32_t count = get_u32();
    const std::uint32_t dim = get_u32();
    Dataset d;
    d.x = Matrix(count, dim);
    in.read(reinterpret_cast<char*>(d.x.data().data()),
            static_cast<std::streamsize>(d.x.data().size() * sizeof(double)));
    std::vector<std::uint8_t> labels(count);
    in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count));
    if (in.gcount() != static_cast<std::streamsize>(count))
        throw ParseError(path.string() + ": dataset payload shorter than header promises");
    d.y.assign(labels.begin(), labels.end());
    return d;
}

} // namespace openbox
