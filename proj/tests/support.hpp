#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "faultlab/idx.hpp"
#include "faultlab/rng.hpp"
#include "faultlab/tensor.hpp"

namespace testsup {

namespace fs = std::filesystem;
using faultlab::Tensor;

// Scratch directory removed on destruction.
struct TmpDir {
    fs::path path;

    explicit TmpDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               (tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TmpDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TmpDir(const TmpDir&) = delete;
    TmpDir& operator=(const TmpDir&) = delete;

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
};

inline void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

inline void put_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 24));
    v.push_back(static_cast<std::uint8_t>(x >> 16));
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
}

inline std::vector<std::uint8_t> idx_images_bytes(
    std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
    const std::vector<std::uint8_t>& pixels) {
    std::vector<std::uint8_t> v;
    put_be32(v, 0x00000803u);
    put_be32(v, count);
    put_be32(v, rows);
    put_be32(v, cols);
    v.insert(v.end(), pixels.begin(), pixels.end());
    return v;
}

inline std::vector<std::uint8_t> idx_labels_bytes(
    const std::vector<std::uint8_t>& labels) {
    std::vector<std::uint8_t> v;
    put_be32(v, 0x00000801u);
    put_be32(v, static_cast<std::uint32_t>(labels.size()));
    v.insert(v.end(), labels.begin(), labels.end());
    return v;
}

// Brute-force direct convolution: independent of the production kernels,
// plain sextuple loop over output position, window and channel.
inline Tensor conv2d_oracle(const Tensor& x, const Tensor& W, const Tensor& b) {
    const std::size_t H = x.extent(0), Wd = x.extent(1), Cin = x.extent(2);
    const std::size_t C = W.extent(0), F = W.extent(3);
    Tensor out({H - C + 1, Wd - C + 1, F});
    for (std::size_t i = 0; i + C <= H; ++i)
        for (std::size_t j = 0; j + C <= Wd; ++j)
            for (std::size_t f = 0; f < F; ++f) {
                double acc = b[f];
                for (std::size_t ki = 0; ki < C; ++ki)
                    for (std::size_t kj = 0; kj < C; ++kj)
                        for (std::size_t ci = 0; ci < Cin; ++ci)
                            acc += x.at3(i + ki, j + kj, ci) *
                                   W.at4(ki, kj, ci, f);
                out.at3(i, j, f) = acc;
            }
    return out;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937& g,
                            double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(g);
    return t;
}

// ---------------------------------------------------------------------
// Procedural MNIST-shaped surrogate: 5x7 digit glyphs scaled to 15x21,
// jittered in position and intensity, plus pixel and label noise. Hard
// enough that trained models land at a few percent test error, like the
// real thing. Fully deterministic in (seed, count).

struct SynthParams {
    std::uint64_t seed = 0x5EEDDA7Aull;
    double pixel_noise = 0.25;  // uniform +- amplitude
    double label_noise = 0.015; // fraction of labels redrawn uniformly
};

namespace detail {
// Classic 5x7 column-encoded digit glyphs.
inline const std::uint8_t* glyph(int digit) {
    static const std::uint8_t font[10][5] = {
        {0x3E, 0x51, 0x49, 0x45, 0x3E}, {0x00, 0x42, 0x7F, 0x40, 0x00},
        {0x42, 0x61, 0x51, 0x49, 0x46}, {0x21, 0x41, 0x45, 0x4B, 0x31},
        {0x18, 0x14, 0x12, 0x7F, 0x10}, {0x27, 0x45, 0x45, 0x45, 0x39},
        {0x3C, 0x4A, 0x49, 0x49, 0x30}, {0x01, 0x71, 0x09, 0x05, 0x03},
        {0x36, 0x49, 0x49, 0x49, 0x36}, {0x06, 0x49, 0x49, 0x29, 0x1E}};
    return font[digit];
}
} // namespace detail

// Streams: lane 0 = labels/label noise, lane 1 = geometry, lane 2 = pixels.
inline void synth_sample(const SynthParams& sp, std::uint32_t index,
                         std::uint8_t* pixels28x28, std::uint8_t* label) {
    using faultlab::rng::Domain;
    using faultlab::rng::substream;
    auto lab = substream(sp.seed, Domain::synth_data, 0, index);
    auto geo = substream(sp.seed, Domain::synth_data, 1, index);
    auto pix = substream(sp.seed, Domain::synth_data, 2, index);

    int digit = static_cast<int>(lab.unit_at(0) * 10.0);
    if (digit > 9) digit = 9;
    int shown = digit;
    if (lab.unit_at(1) < sp.label_noise)
        *label = static_cast<std::uint8_t>(lab.unit_at(2) * 10.0) % 10;
    else
        *label = static_cast<std::uint8_t>(digit);

    const int ox = 1 + static_cast<int>(geo.unit_at(0) * 12.0); // glyph 15 wide
    const int oy = 1 + static_cast<int>(geo.unit_at(1) * 6.0);  // glyph 21 tall
    const double intensity = 0.55 + 0.45 * geo.unit_at(2);
    const double noise_amp = sp.pixel_noise * geo.unit_at(3);

    const std::uint8_t* cols = detail::glyph(shown);
    double img[28 * 28] = {0.0};
    for (int gx = 0; gx < 5; ++gx)
        for (int gy = 0; gy < 7; ++gy)
            if (cols[gx] >> gy & 1)
                for (int sx = 0; sx < 3; ++sx)
                    for (int sy = 0; sy < 3; ++sy) {
                        int x = ox + gx * 3 + sx, y = oy + gy * 3 + sy;
                        img[y * 28 + x] = intensity;
                    }
    for (int i = 0; i < 28 * 28; ++i) {
        double u = pix.unit_at(static_cast<std::uint64_t>(i));
        double v = img[i] + noise_amp * (2.0 * u - 1.0);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        pixels28x28[i] = static_cast<std::uint8_t>(v * 255.0 + 0.5);
    }
}

// Writes train/t10k IDX files (train gz-compressed labels exercise the
// gzip path end to end via the normal loaders).
inline void write_synth_mnist(const fs::path& dir, std::size_t train_count,
                              std::size_t test_count,
                              const SynthParams& sp = {}) {
    fs::create_directories(dir);
    auto emit = [&](const std::string& img_name, const std::string& lab_name,
                    std::size_t count, std::uint32_t index_base) {
        std::vector<std::uint8_t> pixels(count * 28 * 28);
        std::vector<std::uint8_t> labels(count);
        for (std::size_t i = 0; i < count; ++i)
            synth_sample(sp, index_base + static_cast<std::uint32_t>(i),
                         pixels.data() + i * 28 * 28, &labels[i]);
        write_bytes(dir / img_name,
                    idx_images_bytes(static_cast<std::uint32_t>(count), 28, 28,
                                     pixels));
        write_bytes(dir / lab_name, idx_labels_bytes(labels));
    };
    emit("train-images-idx3-ubyte", "train-labels-idx1-ubyte", train_count, 0);
    emit("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", test_count,
         0x40000000u);
}

} // namespace testsup
