#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "faultlab/idx.hpp"

namespace faultlab::cli {

struct TrainArgs {
    std::string grid_path;
    std::string data_dir;
    std::string out_dir;
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct EvalArgs {
    std::string zoo_dir;
    std::string kinds = "uniform,erasure";
    std::string p_list = "0,1e-4,1e-3,1e-2";
    int realizations = 10;
    std::uint64_t seed = 0;
    std::string out_csv;
    std::string data_dir;
    int jobs = 1;
};

struct AnalyzeArgs {
    std::string results_csv;
    std::string mode; // curves | smallest | efficiency
    std::string targets;
    std::string group_by = "L";
    std::size_t top_k = 5;
    std::string out_csv;
};

// Trains the grid into out_dir (weight blobs + zoo.json manifest).
// Idempotent: entries whose blob still matches its checksum are skipped.
void cmd_train(const TrainArgs& args);

// Monte-Carlo sweep over the zoo; writes the results CSV.
void cmd_eval(const EvalArgs& args);

// Derives the analysis CSV (robustness curves, smallest model per target,
// or fault-tolerance efficiency) from a results CSV.
void cmd_analyze(const AnalyzeArgs& args);

// Flag wins over the FAULTLAB_DATA_DIR environment variable.
std::filesystem::path resolve_data_dir(const std::string& flag_value);

// dir/base or dir/base.gz, whichever exists.
std::filesystem::path find_idx_file(const std::filesystem::path& dir,
                                    const std::string& base);

idx::Dataset load_mnist_split(const std::filesystem::path& dir, bool train);

} // namespace faultlab::cli
