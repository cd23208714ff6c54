#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faultlab/fault.hpp"
#include "faultlab/idx.hpp"
#include "faultlab/infer.hpp"
#include "faultlab/model.hpp"

namespace faultlab::exp {

// One (model, deviation config) measurement.
struct EvalRecord {
    std::string model_id;
    ModelSpec spec;
    std::size_t n_params = 0;
    fault::DeviationConfig dev;
    int realizations = 0;
    std::vector<double> per_realization_error;
    double mean_error = 0.0;
    double ci95 = 0.0; // 1.96 * sample sd / sqrt(R)
    std::uint64_t seed = 0;
};

struct ResultsTable {
    std::vector<EvalRecord> records;
    std::vector<double> p_values;
    std::vector<fault::DeviationConfig::Kind> kinds;
};

struct ZooModel {
    std::string id;
    TrainedModel model;
};

// R Monte-Carlo realizations of the full test set. Realization r of
// input i draws its deviations from substream (seed, r, i, layer), so
// any parallel schedule over inputs yields the identical record.
EvalRecord evaluate_error_rate(const TrainedModel& m, const std::string& id,
                               const idx::Dataset& test,
                               const fault::DeviationConfig& dev, int R,
                               std::uint64_t seed, int jobs = 1);

// Cross product models x kinds x p_values; per-record seeds derive from
// (seed, model_id, kind, p index) so the table is a pure function of its
// arguments.
ResultsTable sweep(const std::vector<ZooModel>& models,
                   const idx::Dataset& test,
                   const std::vector<double>& p_values,
                   const std::vector<fault::DeviationConfig::Kind>& kinds,
                   int R, std::uint64_t seed, int jobs = 1);

// Grouping key for a record: "L", "N", "C", "P", "F", "pool" or "family".
std::string group_value(const EvalRecord& r, const std::string& key);

// Keep the k models with the lowest deviation-free error inside each
// group; ties break toward fewer parameters, then model_id.
ResultsTable select_best_k_per_group(const ResultsTable& table,
                                     const std::string& group_key,
                                     std::size_t k);

// Smallest model whose mean error at (p, kind) meets the target; ties
// break toward lower mean error, then model_id. Empty when no trained
// model qualifies.
std::optional<EvalRecord> smallest_model_for_target(
    const ResultsTable& table, double target, double p,
    fault::DeviationConfig::Kind kind);

// n(M_o)/n(M) where M_o is the smallest deviation-free model meeting the
// target and M the smallest model meeting it at (p, kind). Throws
// DomainError when no deviation-free model is feasible; empty when M is
// absent (a truncated curve point).
std::optional<double> fault_tolerance_efficiency(
    const ResultsTable& table, double target, double p,
    fault::DeviationConfig::Kind kind);

} // namespace faultlab::exp
