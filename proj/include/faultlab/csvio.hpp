#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "faultlab/experiment.hpp"

namespace faultlab::csvio {

// Locale-independent double formatting (shortest round-trip, dot decimal
// separator) and strict parsing.
std::string fmt_double(double v);
double parse_double(const std::string& s);

// Results CSV: header
//   model_id,kind,p,realizations,mean_error,ci95,n_params,L,N,C,P,F,pool,seed
// one row per (model, kind, p), sorted by (kind, p, n_params, model_id).
// Family fields that do not apply stay empty.
std::string results_csv(const exp::ResultsTable& table);
void write_results_csv(const std::filesystem::path& path,
                       const exp::ResultsTable& table);
exp::ResultsTable read_results_csv(const std::filesystem::path& path);

// Analysis CSVs. Rows for infeasible (target, kind, p) combinations are
// omitted, mirroring truncated curves.
std::string curves_csv(const exp::ResultsTable& selected,
                       const std::string& group_key);
std::string smallest_csv(const exp::ResultsTable& table,
                         const std::vector<double>& targets);
std::string efficiency_csv(const exp::ResultsTable& table,
                           const std::vector<double>& targets);

} // namespace faultlab::csvio
