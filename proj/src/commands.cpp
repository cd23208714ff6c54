#include "faultlab/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "faultlab/csvio.hpp"
#include "faultlab/error.hpp"
#include "faultlab/experiment.hpp"
#include "faultlab/train.hpp"
#include "faultlab/zoo.hpp"

namespace faultlab::cli {

namespace fs = std::filesystem;

std::filesystem::path resolve_data_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("FAULTLAB_DATA_DIR"); env && *env)
        return env;
    throw DomainError(
        "no data directory: pass --data-dir or set FAULTLAB_DATA_DIR");
}

std::filesystem::path find_idx_file(const std::filesystem::path& dir,
                                    const std::string& base) {
    fs::path raw = dir / base;
    if (fs::exists(raw)) return raw;
    fs::path gz = dir / (base + ".gz");
    if (fs::exists(gz)) return gz;
    throw IoError("missing dataset file " + raw.string() + " (or .gz)");
}

idx::Dataset load_mnist_split(const std::filesystem::path& dir, bool train) {
    const char* img = train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
    const char* lab = train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
    return idx::load_dataset(find_idx_file(dir, img), find_idx_file(dir, lab));
}

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t pos = s.find(',', start);
        std::string tok = s.substr(start, pos - start);
        if (!tok.empty()) out.push_back(tok);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

// Runs tasks 0..n-1 on up to `jobs` threads. Results land in
// caller-indexed slots, so the schedule cannot affect the output.
void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<std::size_t>(jobs, n);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace

void cmd_train(const TrainArgs& args) {
    zoo::GridConfig grid = zoo::GridConfig::load(args.grid_path);
    const fs::path data_dir = resolve_data_dir(args.data_dir);
    idx::Dataset train_ds = load_mnist_split(data_dir, true);
    const idx::Dataset test_ds = load_mnist_split(data_dir, false);
    if (grid.subsample_train)
        train_ds = idx::subsample(train_ds, grid.subsample_train);

    fs::create_directories(args.out_dir);
    const fs::path manifest_path = fs::path(args.out_dir) / "zoo.json";
    std::map<std::string, zoo::ZooEntry> existing;
    if (fs::exists(manifest_path)) {
        zoo::ZooManifest old = zoo::load_manifest(manifest_path);
        if (old.base_seed != args.seed)
            throw DomainError("zoo at " + args.out_dir + " was trained with seed " +
                              std::to_string(old.base_seed) + ", not " +
                              std::to_string(args.seed));
        for (auto& e : old.entries) existing.emplace(e.model_id, std::move(e));
    }

    const auto jobs_list = grid.expand();
    struct Task {
        ModelSpec spec;
        std::uint64_t grid_seed;
        std::string id;
    };
    std::vector<Task> todo;
    for (const auto& [spec, gseed] : jobs_list) {
        std::string id = zoo::model_id_for(spec, gseed);
        auto it = existing.find(id);
        if (it != existing.end()) {
            const fs::path blob = fs::path(args.out_dir) / it->second.blob_file;
            if (fs::exists(blob)) {
                auto bytes = idx::read_file_bytes(blob);
                std::string crc = zoo::crc32_hex(zoo::crc32(bytes.data(), bytes.size()));
                if (crc != it->second.crc32_hex)
                    throw CorruptionError("weight blob for " + id +
                                          " does not match its manifest checksum");
                continue; // intact, skip retraining
            }
            existing.erase(it); // stale entry without its blob
        }
        todo.push_back({spec, gseed, std::move(id)});
    }

    std::vector<zoo::ZooEntry> fresh(todo.size());
    parallel_for(todo.size(), args.jobs, [&](std::size_t i) {
        const Task& t = todo[i];
        train::TrainConfig cfg = grid.train;
        cfg.seed = rng::mix64(args.seed, t.grid_seed);
        train::TrainResult res = train::train(t.spec, train_ds, test_ds, cfg);
        auto bytes = zoo::encode_weights(res.model);
        zoo::ZooEntry e;
        e.model_id = t.id;
        e.spec = t.spec;
        e.seed = t.grid_seed;
        e.clean_test_error = res.clean_test_error;
        e.n_params = res.model.n_params();
        e.epoch_loss_first = res.epoch_loss.front();
        e.epoch_loss_last = res.epoch_loss.back();
        e.blob_file = t.id + ".fwb";
        e.crc32_hex = zoo::crc32_hex(zoo::crc32(bytes.data(), bytes.size()));
        zoo::atomic_write(fs::path(args.out_dir) / e.blob_file,
                          std::string(reinterpret_cast<const char*>(bytes.data()),
                                      bytes.size()));
        fresh[i] = std::move(e);
    });

    // Union of untouched entries (other grids included) and fresh ones.
    zoo::ZooManifest manifest;
    manifest.base_seed = args.seed;
    for (auto& [id, e] : existing) manifest.entries.push_back(std::move(e));
    for (auto& e : fresh) manifest.entries.push_back(std::move(e));
    std::sort(manifest.entries.begin(), manifest.entries.end(),
              [](const zoo::ZooEntry& a, const zoo::ZooEntry& b) {
                  return a.model_id < b.model_id;
              });
    zoo::save_manifest(manifest_path, manifest);
}

void cmd_eval(const EvalArgs& args) {
    const fs::path zoo_dir = args.zoo_dir;
    zoo::ZooManifest manifest = zoo::load_manifest(zoo_dir / "zoo.json");
    const fs::path data_dir = resolve_data_dir(args.data_dir);
    const idx::Dataset test_ds = load_mnist_split(data_dir, false);

    std::vector<exp::ZooModel> models;
    for (const zoo::ZooEntry& e : manifest.entries) {
        auto bytes = idx::read_file_bytes(zoo_dir / e.blob_file);
        std::string crc = zoo::crc32_hex(zoo::crc32(bytes.data(), bytes.size()));
        if (crc != e.crc32_hex)
            throw CorruptionError("weight blob for " + e.model_id +
                                  " does not match its manifest checksum");
        models.push_back(
            {e.model_id, zoo::decode_weights(bytes, e.spec, e.blob_file)});
    }

    std::vector<fault::DeviationConfig::Kind> kinds;
    for (const std::string& k : split_csv(args.kinds))
        kinds.push_back(fault::kind_from_name(k));
    std::vector<double> p_values;
    for (const std::string& p : split_csv(args.p_list)) {
        double v = csvio::parse_double(p);
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("deviation probability " + p + " outside [0,1]");
        p_values.push_back(v);
    }

    exp::ResultsTable table = exp::sweep(models, test_ds, p_values, kinds,
                                         args.realizations, args.seed, args.jobs);
    csvio::write_results_csv(args.out_csv, table);
}

void cmd_analyze(const AnalyzeArgs& args) {
    exp::ResultsTable table = csvio::read_results_csv(args.results_csv);
    std::string out;
    if (args.mode == "curves") {
        exp::ResultsTable sel =
            exp::select_best_k_per_group(table, args.group_by, args.top_k);
        out = csvio::curves_csv(sel, args.group_by);
    } else if (args.mode == "smallest" || args.mode == "efficiency") {
        std::vector<double> targets;
        for (const std::string& t : split_csv(args.targets))
            targets.push_back(csvio::parse_double(t));
        if (targets.empty())
            throw DomainError("mode " + args.mode + " needs --targets");
        out = args.mode == "smallest" ? csvio::smallest_csv(table, targets)
                                      : csvio::efficiency_csv(table, targets);
    } else {
        throw DomainError("unknown analyze mode '" + args.mode +
                          "' (curves|smallest|efficiency)");
    }
    zoo::atomic_write(args.out_csv, out);
}

} // namespace faultlab::cli
