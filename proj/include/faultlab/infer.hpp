#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "faultlab/fault.hpp"
#include "faultlab/idx.hpp"
#include "faultlab/model.hpp"
#include "faultlab/tensor.hpp"

namespace faultlab {

// Identifies one Monte-Carlo trial: all fault draws inside a forward pass
// are addressed by (key, input_index, realization, layer, element).
struct EvalContext {
    rng::Key key;
    std::uint32_t input_index = 0;
    std::uint32_t realization = 0;

    static EvalContext from_seed(std::uint64_t seed, std::uint32_t input = 0,
                                 std::uint32_t realization = 0) {
        return {rng::key_from_seed(seed), input, realization};
    }
};

// Test hook: overrides the sampled deviation mask for chosen layers.
struct ForcedMasks {
    std::map<std::size_t, std::vector<std::uint8_t>> by_layer;
};

// Fault-free inference. Deliberately separate from forward(): the faulty
// path with p = 0 must reproduce this one bitwise.
Tensor forward_clean(const TrainedModel& m, const Tensor& x);

// Faulty inference: every layer's pre-activation (classification logits
// included) receives per-scalar deviations before the activation; pooling
// runs after injection and activation; the softmax is computed reliably.
Tensor forward(const TrainedModel& m, const Tensor& x,
               const fault::DeviationConfig& dev, const EvalContext& ctx,
               const ForcedMasks* forced = nullptr);

// argmax class with lowest-index tie-break.
std::size_t predict(const Tensor& probs);

// Misclassification fraction of the clean model over a dataset.
double clean_error_rate(const TrainedModel& m, const idx::Dataset& data);

} // namespace faultlab
