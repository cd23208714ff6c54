#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "faultlab/rng.hpp"
#include "faultlab/tensor.hpp"

namespace faultlab::fault {

// Deviation models for unreliable computation. A deviation event replaces
// one pre-activation scalar: the conditionally uniform model redraws it
// uniformly from the circuit's bounded output domain; the erasure model
// substitutes the neutral value 0. Events strike each scalar
// independently with probability p.
struct DeviationConfig {
    enum class Kind { none, conditionally_uniform, erasure };

    Kind kind = Kind::none;
    double p = 0.0;
    double range_lo = -1.0;
    double range_hi = 1.0;

    void validate() const;
    double effective_p() const { return kind == Kind::none ? 0.0 : p; }

    bool operator==(const DeviationConfig&) const = default;
};

const char* kind_name(DeviationConfig::Kind k);
DeviationConfig::Kind kind_from_name(const std::string& s);

// Addresses the fault draws of one layer within one (input, realization)
// pair. Each scalar element owns one counter block: the first double
// decides the event, the second supplies the replacement value. Distinct
// layers, inputs and realizations live in disjoint counter slices, so
// fixing one layer's draws never changes another's.
struct FaultStream {
    rng::Key key;
    std::uint32_t input_index = 0;
    std::uint32_t realization = 0;
    std::uint32_t layer = 0;

    std::pair<double, double> draws_at(std::uint32_t element) const {
        rng::Block b = rng::philox4x32(
            {element, input_index, realization,
             rng::domain_tag(rng::Domain::fault, layer)},
            key);
        return {rng::unit_double(b[0], b[1]), rng::unit_double(b[2], b[3])};
    }
};

// Element e is true with probability p, independently.
std::vector<std::uint8_t> sample_deviation_mask(std::size_t n, double p,
                                                const FaultStream& fs);

// Masked elements are redrawn uniformly on [lo, hi); unmasked elements
// pass through bitwise.
Tensor apply_conditionally_uniform(const Tensor& pre,
                                   const std::vector<std::uint8_t>& mask,
                                   double lo, double hi,
                                   const FaultStream& fs);

// Masked elements become exactly 0; unmasked elements pass through
// bitwise.
Tensor apply_erasure(const Tensor& pre, const std::vector<std::uint8_t>& mask);

// In-place variants used by the forward pass.
void apply_conditionally_uniform_inplace(Tensor& pre,
                                         const std::vector<std::uint8_t>& mask,
                                         double lo, double hi,
                                         const FaultStream& fs);
void apply_erasure_inplace(Tensor& pre, const std::vector<std::uint8_t>& mask);

} // namespace faultlab::fault
