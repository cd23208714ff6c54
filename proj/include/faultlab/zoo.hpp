#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "faultlab/model.hpp"
#include "faultlab/train.hpp"

namespace faultlab::zoo {

// CRC-32 (reflected 0xEDB88320), used as the blob content checksum.
std::uint32_t crc32(const std::uint8_t* data, std::size_t len);
std::string crc32_hex(std::uint32_t v);

// Write bytes via a temp file in the same directory plus rename, so
// readers never observe a partial file.
void atomic_write(const std::filesystem::path& path,
                  const std::string& bytes);

// Weight blob: 8-byte magic, u32 format version, u32 layer count, then
// per layer W and b as (u32 rank, u32 extents..., f64 row-major data),
// everything little-endian.
std::vector<std::uint8_t> encode_weights(const TrainedModel& m);
void write_weights_blob(const std::filesystem::path& path,
                        const TrainedModel& m);

// Decodes and validates against the model spec's layer plan; shape drift
// or a bad header throws FormatError.
TrainedModel decode_weights(const std::vector<std::uint8_t>& bytes,
                            const ModelSpec& spec, const std::string& name);
TrainedModel read_weights_blob(const std::filesystem::path& path,
                               const ModelSpec& spec);

struct ZooEntry {
    std::string model_id;
    ModelSpec spec;
    std::uint64_t seed = 0; // grid seed (training seed = mix with base)
    double clean_test_error = 0.0;
    std::size_t n_params = 0;
    double epoch_loss_first = 0.0;
    double epoch_loss_last = 0.0;
    std::string blob_file;
    std::string crc32_hex;
};

struct ZooManifest {
    std::uint64_t base_seed = 0;
    std::vector<ZooEntry> entries; // sorted by model_id
};

void save_manifest(const std::filesystem::path& path, const ZooManifest& m);
ZooManifest load_manifest(const std::filesystem::path& path);

// Hyperparameter grid: cross products of the family descriptors times the
// seed list. Expansion validates every spec and rejects duplicate
// (spec, seed) keys.
struct GridConfig {
    std::vector<int> mlp_L, mlp_N;
    std::vector<int> cnn_L, cnn_C, cnn_P, cnn_F;
    std::vector<Pooling> cnn_pool;
    std::vector<std::uint64_t> seeds;
    train::TrainConfig train;
    std::size_t subsample_train = 0; // 0 = full training set

    static GridConfig load(const std::filesystem::path& path);
    std::vector<std::pair<ModelSpec, std::uint64_t>> expand() const;
};

std::string model_id_for(const ModelSpec& spec, std::uint64_t seed);

} // namespace faultlab::zoo
