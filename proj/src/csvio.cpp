#include "faultlab/csvio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>

#include "faultlab/error.hpp"
#include "faultlab/zoo.hpp"

namespace faultlab::csvio {

namespace {

using Kind = fault::DeviationConfig::Kind;

int kind_order(Kind k) { return static_cast<int>(k); }

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace

std::string fmt_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError("bad number '" + s + "'");
    return v;
}

namespace {

std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError("bad integer '" + s + "'");
    return v;
}

} // namespace

std::string results_csv(const exp::ResultsTable& table) {
    std::vector<const exp::EvalRecord*> rows;
    rows.reserve(table.records.size());
    for (const auto& r : table.records) rows.push_back(&r);
    std::sort(rows.begin(), rows.end(),
              [](const exp::EvalRecord* a, const exp::EvalRecord* b) {
                  if (a->dev.kind != b->dev.kind)
                      return kind_order(a->dev.kind) < kind_order(b->dev.kind);
                  if (a->dev.p != b->dev.p) return a->dev.p < b->dev.p;
                  if (a->n_params != b->n_params)
                      return a->n_params < b->n_params;
                  return a->model_id < b->model_id;
              });
    std::string out =
        "model_id,kind,p,realizations,mean_error,ci95,n_params,L,N,C,P,F,pool,seed\n";
    for (const exp::EvalRecord* r : rows) {
        const ModelSpec& s = r->spec;
        const bool mlp = s.kind == ModelKind::mlp;
        out += r->model_id;
        out += ',';
        out += fault::kind_name(r->dev.kind);
        out += ',';
        out += fmt_double(r->dev.p);
        out += ',';
        out += std::to_string(r->realizations);
        out += ',';
        out += fmt_double(r->mean_error);
        out += ',';
        out += fmt_double(r->ci95);
        out += ',';
        out += std::to_string(r->n_params);
        out += ',';
        out += std::to_string(s.layers);
        out += ',';
        out += mlp ? std::to_string(s.neurons) : "";
        out += ',';
        out += mlp ? "" : std::to_string(s.kernel);
        out += ',';
        out += mlp ? "" : std::to_string(s.pool_size);
        out += ',';
        out += mlp ? "" : std::to_string(s.feature_maps);
        out += ',';
        out += mlp ? "" : pooling_name(s.pooling);
        out += ',';
        out += std::to_string(r->seed);
        out += '\n';
    }
    return out;
}

void write_results_csv(const std::filesystem::path& path,
                       const exp::ResultsTable& table) {
    zoo::atomic_write(path, results_csv(table));
}

exp::ResultsTable read_results_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open results CSV " + path.string());
    std::string line;
    std::size_t lineno = 0;
    exp::ResultsTable table;
    std::set<double> p_seen;
    std::set<int> kind_seen;
    const std::string expect_header =
        "model_id,kind,p,realizations,mean_error,ci95,n_params,L,N,C,P,F,pool,seed";
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line != expect_header)
                throw ParseError(path.string() + ":1: unexpected header '" +
                                 line + "'");
            continue;
        }
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != 14)
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected 14 columns, got " +
                             std::to_string(cells.size()));
        try {
            exp::EvalRecord r;
            r.model_id = cells[0];
            r.dev.kind = fault::kind_from_name(cells[1]);
            r.dev.p = parse_double(cells[2]);
            r.realizations = static_cast<int>(parse_u64(cells[3]));
            r.mean_error = parse_double(cells[4]);
            r.ci95 = parse_double(cells[5]);
            r.n_params = parse_u64(cells[6]);
            const bool mlp = !cells[8].empty();
            if (mlp) {
                r.spec = ModelSpec::mlp(static_cast<int>(parse_double(cells[7])),
                                        static_cast<int>(parse_double(cells[8])));
            } else {
                r.spec = ModelSpec::cnn(static_cast<int>(parse_double(cells[7])),
                                        static_cast<int>(parse_double(cells[9])),
                                        static_cast<int>(parse_double(cells[10])),
                                        static_cast<int>(parse_double(cells[11])),
                                        pooling_from_name(cells[12]));
            }
            r.seed = parse_u64(cells[13]);
            p_seen.insert(r.dev.p);
            kind_seen.insert(kind_order(r.dev.kind));
            table.records.push_back(std::move(r));
        } catch (const Error& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": " + e.what());
        }
    }
    if (table.records.empty())
        throw ParseError(path.string() + ": no data rows");
    table.p_values.assign(p_seen.begin(), p_seen.end());
    for (int k : kind_seen) table.kinds.push_back(static_cast<Kind>(k));
    return table;
}

namespace {

// Numeric-aware group ordering so "10" sorts after "2".
bool group_less(const std::string& a, const std::string& b) {
    double av = 0, bv = 0;
    auto ra = std::from_chars(a.data(), a.data() + a.size(), av);
    auto rb = std::from_chars(b.data(), b.data() + b.size(), bv);
    const bool na = ra.ec == std::errc{} && ra.ptr == a.data() + a.size();
    const bool nb = rb.ec == std::errc{} && rb.ptr == b.data() + b.size();
    if (na && nb) return av < bv;
    if (na != nb) return na;
    return a < b;
}

} // namespace

std::string curves_csv(const exp::ResultsTable& selected,
                       const std::string& group_key) {
    std::vector<const exp::EvalRecord*> rows;
    for (const auto& r : selected.records) rows.push_back(&r);
    std::sort(rows.begin(), rows.end(),
              [&](const exp::EvalRecord* a, const exp::EvalRecord* b) {
                  std::string ga = exp::group_value(*a, group_key);
                  std::string gb = exp::group_value(*b, group_key);
                  if (ga != gb) return group_less(ga, gb);
                  if (a->model_id != b->model_id)
                      return a->model_id < b->model_id;
                  if (a->dev.kind != b->dev.kind)
                      return kind_order(a->dev.kind) < kind_order(b->dev.kind);
                  return a->dev.p < b->dev.p;
              });
    std::string out = "group,model_id,kind,p,mean_error,ci95,n_params\n";
    for (const exp::EvalRecord* r : rows) {
        out += exp::group_value(*r, group_key);
        out += ',';
        out += r->model_id;
        out += ',';
        out += fault::kind_name(r->dev.kind);
        out += ',';
        out += fmt_double(r->dev.p);
        out += ',';
        out += fmt_double(r->mean_error);
        out += ',';
        out += fmt_double(r->ci95);
        out += ',';
        out += std::to_string(r->n_params);
        out += '\n';
    }
    return out;
}

namespace {

std::vector<Kind> analysis_kinds(const exp::ResultsTable& table) {
    std::vector<Kind> kinds;
    for (Kind k : table.kinds)
        if (k != Kind::none) kinds.push_back(k);
    if (kinds.empty())
        throw DomainError("results contain no deviation kinds to analyze");
    return kinds;
}

} // namespace

std::string smallest_csv(const exp::ResultsTable& table,
                         const std::vector<double>& targets) {
    std::string out = "target,kind,p,model_id,n_params\n";
    for (double target : targets) {
        for (Kind k : analysis_kinds(table)) {
            for (double p : table.p_values) {
                auto rec = exp::smallest_model_for_target(table, target, p, k);
                if (!rec) continue; // truncated curve
                out += fmt_double(target);
                out += ',';
                out += fault::kind_name(k);
                out += ',';
                out += fmt_double(p);
                out += ',';
                out += rec->model_id;
                out += ',';
                out += std::to_string(rec->n_params);
                out += '\n';
            }
        }
    }
    return out;
}

std::string efficiency_csv(const exp::ResultsTable& table,
                           const std::vector<double>& targets) {
    std::string out = "target,kind,p,efficiency\n";
    for (double target : targets) {
        for (Kind k : analysis_kinds(table)) {
            for (double p : table.p_values) {
                auto eff = exp::fault_tolerance_efficiency(table, target, p, k);
                if (!eff) continue;
                out += fmt_double(target);
                out += ',';
                out += fault::kind_name(k);
                out += ',';
                out += fmt_double(p);
                out += ',';
                out += fmt_double(*eff);
                out += '\n';
            }
        }
    }
    return out;
}

} // namespace faultlab::csvio
