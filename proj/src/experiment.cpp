#include "faultlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "faultlab/error.hpp"
#include "faultlab/ops.hpp"

namespace faultlab::exp {

namespace {

using Kind = fault::DeviationConfig::Kind;

void finalize_stats(EvalRecord& rec) {
    const auto& e = rec.per_realization_error;
    double sum = 0.0;
    for (double v : e) sum += v;
    rec.mean_error = sum / static_cast<double>(e.size());
    if (e.size() > 1) {
        double ss = 0.0;
        for (double v : e) ss += (v - rec.mean_error) * (v - rec.mean_error);
        double sd = std::sqrt(ss / static_cast<double>(e.size() - 1));
        rec.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(e.size()));
    }
}

} // namespace

EvalRecord evaluate_error_rate(const TrainedModel& m, const std::string& id,
                               const idx::Dataset& test,
                               const fault::DeviationConfig& dev, int R,
                               std::uint64_t seed, int jobs) {
    dev.validate();
    if (R < 1) throw DomainError("realization count must be >= 1");
    if (test.count() == 0) throw DomainError("empty test set");

    EvalRecord rec;
    rec.model_id = id;
    rec.spec = m.spec;
    rec.n_params = m.n_params();
    rec.dev = dev;
    rec.realizations = R;
    rec.seed = seed;

    const std::size_t N = test.count();
    const rng::Key key = rng::key_from_seed(seed);

    // With no deviation events every realization is the same full-set
    // pass; evaluate realization 0 once and replicate.
    const bool degenerate = dev.effective_p() == 0.0;
    const int runs = degenerate ? 1 : R;

    std::vector<std::uint64_t> wrong(static_cast<std::size_t>(runs), 0);
    const int nthreads = std::max(1, jobs);
    auto worker = [&](std::size_t t, std::vector<std::uint64_t>& local) {
        const std::size_t lo = N * t / nthreads;
        const std::size_t hi = N * (t + 1) / nthreads;
        for (std::size_t i = lo; i < hi; ++i) {
            const Tensor x = ops::image_at(test.images, i);
            const auto label = static_cast<std::size_t>(test.labels[i]);
            for (int r = 0; r < runs; ++r) {
                EvalContext ctx{key, static_cast<std::uint32_t>(i),
                                static_cast<std::uint32_t>(r)};
                Tensor probs = forward(m, x, dev, ctx);
                local[static_cast<std::size_t>(r)] += predict(probs) != label;
            }
        }
    };
    if (nthreads == 1) {
        worker(0, wrong);
    } else {
        std::vector<std::vector<std::uint64_t>> partial(
            nthreads, std::vector<std::uint64_t>(runs, 0));
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back(worker, t, std::ref(partial[t]));
        for (auto& th : pool) th.join();
        for (const auto& p : partial)
            for (int r = 0; r < runs; ++r) wrong[r] += p[r];
    }

    rec.per_realization_error.resize(R);
    for (int r = 0; r < R; ++r)
        rec.per_realization_error[r] =
            static_cast<double>(wrong[degenerate ? 0 : r]) /
            static_cast<double>(N);
    finalize_stats(rec);
    return rec;
}

ResultsTable sweep(const std::vector<ZooModel>& models,
                   const idx::Dataset& test,
                   const std::vector<double>& p_values,
                   const std::vector<Kind>& kinds, int R, std::uint64_t seed,
                   int jobs) {
    if (models.empty() || p_values.empty() || kinds.empty())
        throw DomainError("sweep needs nonempty models, p values and kinds");
    ResultsTable table;
    table.p_values = p_values;
    table.kinds = kinds;
    for (const ZooModel& zm : models) {
        const std::uint64_t model_salt =
            rng::mix64(seed, rng::fnv1a(zm.id.data(), zm.id.size()));
        for (std::size_t k = 0; k < kinds.size(); ++k) {
            for (std::size_t pi = 0; pi < p_values.size(); ++pi) {
                fault::DeviationConfig dev;
                dev.kind = kinds[k];
                dev.p = p_values[pi];
                const std::uint64_t rec_seed = rng::mix64(
                    model_salt,
                    (static_cast<std::uint64_t>(k + 1) << 32) | pi);
                table.records.push_back(evaluate_error_rate(
                    zm.model, zm.id, test, dev, R, rec_seed, jobs));
            }
        }
    }
    return table;
}

std::string group_value(const EvalRecord& r, const std::string& key) {
    const ModelSpec& s = r.spec;
    if (key == "L") return std::to_string(s.layers);
    if (key == "family") return s.kind == ModelKind::mlp ? "mlp" : "cnn";
    if (key == "N")
        return s.kind == ModelKind::mlp ? std::to_string(s.neurons) : "";
    if (s.kind != ModelKind::cnn) return "";
    if (key == "C") return std::to_string(s.kernel);
    if (key == "P") return std::to_string(s.pool_size);
    if (key == "F") return std::to_string(s.feature_maps);
    if (key == "pool") return pooling_name(s.pooling);
    throw DomainError("unknown group key '" + key + "'");
}

namespace {

struct CleanStat {
    double error = 0.0;
    std::size_t n_params = 0;
};

// Deviation-free error per model: the record at p == 0 (or kind none).
std::map<std::string, CleanStat> clean_stats(const ResultsTable& table) {
    std::map<std::string, CleanStat> out;
    std::set<std::string> all;
    for (const EvalRecord& r : table.records) {
        all.insert(r.model_id);
        if (r.dev.effective_p() == 0.0 && !out.count(r.model_id))
            out[r.model_id] = {r.mean_error, r.n_params};
    }
    for (const std::string& id : all)
        if (!out.count(id))
            throw DomainError("no deviation-free record for model " + id);
    return out;
}

} // namespace

ResultsTable select_best_k_per_group(const ResultsTable& table,
                                     const std::string& group_key,
                                     std::size_t k) {
    auto clean = clean_stats(table);
    std::map<std::string, std::vector<std::string>> groups;
    std::map<std::string, const EvalRecord*> sample;
    for (const EvalRecord& r : table.records) {
        if (!sample.count(r.model_id)) {
            sample[r.model_id] = &r;
            groups[group_value(r, group_key)].push_back(r.model_id);
        }
    }
    std::set<std::string> kept;
    for (auto& [g, ids] : groups) {
        std::sort(ids.begin(), ids.end(),
                  [&](const std::string& a, const std::string& b) {
                      const CleanStat& ca = clean[a];
                      const CleanStat& cb = clean[b];
                      if (ca.error != cb.error) return ca.error < cb.error;
                      if (ca.n_params != cb.n_params)
                          return ca.n_params < cb.n_params;
                      return a < b;
                  });
        for (std::size_t i = 0; i < ids.size() && i < k; ++i)
            kept.insert(ids[i]);
    }
    ResultsTable out;
    out.p_values = table.p_values;
    out.kinds = table.kinds;
    for (const EvalRecord& r : table.records)
        if (kept.count(r.model_id)) out.records.push_back(r);
    return out;
}

std::optional<EvalRecord> smallest_model_for_target(const ResultsTable& table,
                                                    double target, double p,
                                                    Kind kind) {
    const EvalRecord* best = nullptr;
    for (const EvalRecord& r : table.records) {
        if (r.dev.kind != kind || r.dev.p != p) continue;
        if (r.mean_error > target) continue;
        if (!best || r.n_params < best->n_params ||
            (r.n_params == best->n_params &&
             (r.mean_error < best->mean_error ||
              (r.mean_error == best->mean_error &&
               r.model_id < best->model_id))))
            best = &r;
    }
    if (!best) return std::nullopt;
    return *best;
}

std::optional<double> fault_tolerance_efficiency(const ResultsTable& table,
                                                 double target, double p,
                                                 Kind kind) {
    const EvalRecord* clean_best = nullptr;
    for (const EvalRecord& r : table.records) {
        if (r.dev.effective_p() != 0.0 || r.mean_error > target) continue;
        if (!clean_best || r.n_params < clean_best->n_params ||
            (r.n_params == clean_best->n_params &&
             r.model_id < clean_best->model_id))
            clean_best = &r;
    }
    if (!clean_best)
        throw DomainError("no deviation-free model achieves target " +
                          std::to_string(target));
    auto faulty = smallest_model_for_target(table, target, p, kind);
    if (!faulty) return std::nullopt;
    return static_cast<double>(clean_best->n_params) /
           static_cast<double>(faulty->n_params);
}

} // namespace faultlab::exp
