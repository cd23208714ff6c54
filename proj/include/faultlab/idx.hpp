#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "faultlab/tensor.hpp"

namespace faultlab::idx {

// MNIST IDX container support. Files are raw IDX or gzip-compressed,
// decided by a ".gz" extension. All header words are big-endian
// regardless of host byte order.

// Whole file as bytes, transparently inflated for *.gz paths.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// IDX3 u8 images -> count x rows x cols tensor, pixel byte / 255.
Tensor load_idx_images(const std::filesystem::path& path);

// IDX1 u8 labels, each in 0..9.
std::vector<int> load_idx_labels(const std::filesystem::path& path);

// Rows are standard basis vectors e_label.
Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes);

struct Dataset {
    Tensor images;            // count x rows x cols, values in [0,1]
    std::vector<int> labels;  // values 0..9
    Tensor one_hot;           // count x num_classes

    std::size_t count() const { return labels.size(); }
    std::size_t input_size() const {
        return images.extent(1) * images.extent(2);
    }
};

Dataset load_dataset(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path,
                     std::size_t num_classes = 10);

// First n samples of d (n >= count returns a copy).
Dataset subsample(const Dataset& d, std::size_t n);

} // namespace faultlab::idx
