#include "faultlab/fault.hpp"

#include "faultlab/error.hpp"

namespace faultlab::fault {

void DeviationConfig::validate() const {
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("deviation probability " + std::to_string(p) +
                          " outside [0,1]");
    if (!(range_lo < range_hi))
        throw DomainError("deviation range [" + std::to_string(range_lo) + ", " +
                          std::to_string(range_hi) + "] is empty");
}

const char* kind_name(DeviationConfig::Kind k) {
    switch (k) {
        case DeviationConfig::Kind::none: return "none";
        case DeviationConfig::Kind::conditionally_uniform: return "uniform";
        case DeviationConfig::Kind::erasure: return "erasure";
    }
    return "?";
}

DeviationConfig::Kind kind_from_name(const std::string& s) {
    if (s == "none") return DeviationConfig::Kind::none;
    if (s == "uniform" || s == "conditionally_uniform")
        return DeviationConfig::Kind::conditionally_uniform;
    if (s == "erasure") return DeviationConfig::Kind::erasure;
    throw DomainError("unknown deviation kind '" + s + "'");
}

std::vector<std::uint8_t> sample_deviation_mask(std::size_t n, double p,
                                                const FaultStream& fs) {
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("deviation probability " + std::to_string(p) +
                          " outside [0,1]");
    std::vector<std::uint8_t> mask(n);
    for (std::size_t e = 0; e < n; ++e)
        mask[e] = fs.draws_at(static_cast<std::uint32_t>(e)).first < p;
    return mask;
}

namespace {

void check_mask(const Tensor& pre, const std::vector<std::uint8_t>& mask) {
    if (mask.size() != pre.size())
        throw ShapeError("deviation mask length " + std::to_string(mask.size()) +
                         " vs tensor " + shape_str(pre.shape()));
}

} // namespace

void apply_conditionally_uniform_inplace(Tensor& pre,
                                         const std::vector<std::uint8_t>& mask,
                                         double lo, double hi,
                                         const FaultStream& fs) {
    check_mask(pre, mask);
    for (std::size_t e = 0; e < mask.size(); ++e) {
        if (!mask[e]) continue;
        double u = fs.draws_at(static_cast<std::uint32_t>(e)).second;
        pre[e] = lo + u * (hi - lo);
    }
}

void apply_erasure_inplace(Tensor& pre, const std::vector<std::uint8_t>& mask) {
    check_mask(pre, mask);
    for (std::size_t e = 0; e < mask.size(); ++e)
        if (mask[e]) pre[e] = 0.0;
}

Tensor apply_conditionally_uniform(const Tensor& pre,
                                   const std::vector<std::uint8_t>& mask,
                                   double lo, double hi,
                                   const FaultStream& fs) {
    Tensor out = pre;
    apply_conditionally_uniform_inplace(out, mask, lo, hi, fs);
    return out;
}

Tensor apply_erasure(const Tensor& pre, const std::vector<std::uint8_t>& mask) {
    Tensor out = pre;
    apply_erasure_inplace(out, mask);
    return out;
}

} // namespace faultlab::fault
