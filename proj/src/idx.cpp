#include <cstdio>
#include <fstream>

#include <zlib.h>

#include "faultlab/error.hpp"
#include "faultlab/idx.hpp"

namespace faultlab::idx {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803u; // 2051
constexpr std::uint32_t kLabelsMagic = 0x00000801u; // 2049

std::vector<std::uint8_t> read_gzip(const std::filesystem::path& path) {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof(buf))) > 0)
        out.insert(out.end(), buf, buf + n);
    if (n < 0) {
        int errnum = 0;
        std::string msg = gzerror(f, &errnum);
        gzclose(f);
        throw IoError("gzip read failed for " + path.string() + ": " + msg);
    }
    gzclose(f);
    return out;
}

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

// Header check shared by both loaders: magic plus dim_count big-endian
// u32 dimensions must be present.
std::vector<std::uint32_t> parse_header(const std::vector<std::uint8_t>& bytes,
                                        std::uint32_t want_magic,
                                        std::size_t dim_count,
                                        const std::filesystem::path& path) {
    std::size_t header = 4 + 4 * dim_count;
    if (bytes.size() < header)
        throw FormatError(path.string() + ": file shorter than IDX header (" +
                          std::to_string(bytes.size()) + " bytes)");
    std::uint32_t magic = be32(bytes.data());
    if (magic != want_magic)
        throw FormatError(path.string() + ": bad IDX magic " + hex32(magic) +
                          ", expected " + hex32(want_magic));
    std::vector<std::uint32_t> dims(dim_count);
    for (std::size_t d = 0; d < dim_count; ++d)
        dims[d] = be32(bytes.data() + 4 + 4 * d);
    std::uint64_t payload = 1;
    for (std::uint32_t d : dims) payload *= d;
    if (bytes.size() != header + payload)
        throw FormatError(path.string() + ": payload length mismatch, header says " +
                          std::to_string(payload) + " bytes but file carries " +
                          std::to_string(bytes.size() - header));
    return dims;
}

} // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    if (path.extension() == ".gz") return read_gzip(path);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Tensor load_idx_images(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    auto dims = parse_header(bytes, kImagesMagic, 3, path);
    std::size_t count = dims[0], rows = dims[1], cols = dims[2];
    std::vector<double> data(count * rows * cols);
    const std::uint8_t* p = bytes.data() + 16;
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = p[i] / 255.0;
    return Tensor({count, rows, cols}, std::move(data));
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    auto dims = parse_header(bytes, kLabelsMagic, 1, path);
    std::size_t count = dims[0];
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
        int v = bytes[8 + i];
        if (v > 9)
            throw DomainError(path.string() + ": label byte " + std::to_string(v) +
                              " at index " + std::to_string(i) + " outside 0..9");
        labels[i] = v;
    }
    return labels;
}

Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes) {
    Tensor out({labels.size(), num_classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int l = labels[i];
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
            throw DomainError("label " + std::to_string(l) + " out of range for " +
                              std::to_string(num_classes) + " classes");
        out.at2(i, static_cast<std::size_t>(l)) = 1.0;
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path,
                     std::size_t num_classes) {
    Dataset d;
    d.images = load_idx_images(images_path);
    d.labels = load_idx_labels(labels_path);
    if (d.images.extent(0) != d.labels.size())
        throw FormatError("image count " + std::to_string(d.images.extent(0)) +
                          " != label count " + std::to_string(d.labels.size()));
    d.one_hot = one_hot(d.labels, num_classes);
    return d;
}

Dataset subsample(const Dataset& d, std::size_t n) {
    if (n >= d.count()) return d;
    std::size_t rows = d.images.extent(1), cols = d.images.extent(2);
    std::vector<double> img(d.images.data(), d.images.data() + n * rows * cols);
    Dataset out;
    out.images = Tensor({n, rows, cols}, std::move(img));
    out.labels.assign(d.labels.begin(), d.labels.begin() + n);
    out.one_hot = one_hot(out.labels, d.one_hot.extent(1));
    return out;
}

} // namespace faultlab::idx
