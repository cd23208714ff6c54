#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "faultlab/idx.hpp"
#include "faultlab/model.hpp"
#include "faultlab/rng.hpp"
#include "faultlab/tensor.hpp"

namespace faultlab::train {

struct TrainConfig {
    int batch_size = 128;
    int epochs = 15;
    double dropout_conv = 0.25;  // conv layer outputs, first layer exempt
    double dropout_dense = 0.50; // dense hidden outputs, first layer exempt
    double adadelta_rho = 0.95;
    double adadelta_eps = 1e-6;
    std::uint64_t seed = 0;

    void validate() const;
};

// Dropout rate applied to the output of layer `layer` during training.
// The network's first layer and the classification layer never drop.
double layer_dropout_rate(const ModelSpec& spec, std::size_t layer,
                          const TrainConfig& cfg);

// Inverted dropout: elements are zeroed with probability rate and
// survivors scaled by 1/(1-rate), so the expectation equals the input.
Tensor apply_dropout(const Tensor& x, double rate, rng::Substream stream);
Tensor apply_dropout(const Tensor& x, double rate,
                     const std::vector<std::uint8_t>& keep);

// Mean over the batch of -log(p of the true class); probabilities are
// floored at 1e-12 before the log. probs and targets are {B, K}.
double crossentropy_loss(const Tensor& probs, const Tensor& targets);

struct Gradients {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;

    static Gradients like(const TrainedModel& m);
};

// Keep masks for one optimizer step: keep[l] holds slots x units bytes
// for layers with a nonzero rate and is empty otherwise.
struct DropoutMasks {
    std::vector<double> rate;
    std::vector<std::vector<std::uint8_t>> keep;
};

DropoutMasks sample_dropout_masks(const ModelSpec& spec, const TrainConfig& cfg,
                                  std::uint32_t step, std::size_t slots);

struct BackwardResult {
    double loss = 0.0;
    Gradients grads;
};

// Exact gradients of the batch loss with the given dropout masks treated
// as constants. The masks stay frozen so finite differences of
// batch_loss_with_masks can check every component.
BackwardResult backward_with_masks(const TrainedModel& m,
                                   const idx::Dataset& data,
                                   std::span<const std::size_t> indices,
                                   const DropoutMasks& masks);

double batch_loss_with_masks(const TrainedModel& m, const idx::Dataset& data,
                             std::span<const std::size_t> indices,
                             const DropoutMasks& masks);

// Samples this step's dropout masks, then delegates to
// backward_with_masks.
BackwardResult backward(const TrainedModel& m, const idx::Dataset& data,
                        std::span<const std::size_t> indices,
                        const TrainConfig& cfg, std::uint32_t step);

// Instrumentation hook: what the training-time forward computes for one
// sample. pre[l] is the pre-activation; out[l] is the transformed output
// fed to layer l+1 (post activation, pooling and dropout).
struct ForwardTrace {
    std::vector<Tensor> pre;
    std::vector<Tensor> out;
    Tensor probs;
};

ForwardTrace trace_forward(const TrainedModel& m, const idx::Dataset& data,
                           std::size_t sample, const DropoutMasks& masks,
                           std::size_t slot);

struct AdadeltaState {
    std::vector<Tensor> eg2_w, edx2_w;
    std::vector<Tensor> eg2_b, edx2_b;

    static AdadeltaState like(const TrainedModel& m);
};

//   eg2 <- rho eg2 + (1-rho) g^2
//   d    = -sqrt(edx2+eps)/sqrt(eg2+eps) g
//   edx2 <- rho edx2 + (1-rho) d^2
//   p   <- p + d
void adadelta_update(TrainedModel& m, const Gradients& g, AdadeltaState& st,
                     double rho, double eps);

struct TrainResult {
    TrainedModel model;
    std::vector<double> epoch_loss; // mean training loss per epoch
    double clean_test_error = 0.0;
    std::size_t steps_run = 0;
};

// The full recipe: Glorot init, shuffled batches (reshuffled per epoch
// from a dedicated substream of cfg.seed), inverted dropout, categorical
// cross-entropy, adadelta. Training is always fault-free; deterministic
// given (spec, data, cfg).
TrainResult train(const ModelSpec& spec, const idx::Dataset& train_data,
                  const idx::Dataset& test_data, const TrainConfig& cfg);

} // namespace faultlab::train
