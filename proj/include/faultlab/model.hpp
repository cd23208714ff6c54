#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "faultlab/rng.hpp"
#include "faultlab/tensor.hpp"

namespace faultlab {

enum class ModelKind { mlp, cnn };
enum class Pooling { max, none };

// Hyperparameter description of one network in the MLP-L-N or
// CNN-L-C-P-F-pool family, plus the implicit softmax classification
// layer. P == 1 means no spatial reduction even when pooling is "max";
// pooling "none" is carried verbatim so the family name round-trips.
struct ModelSpec {
    ModelKind kind = ModelKind::mlp;
    int layers = 1;       // L: hidden dense layers (MLP) or conv layers (CNN)
    int neurons = 0;      // N, MLP only
    int kernel = 0;       // C, CNN only
    int pool_size = 1;    // P, CNN only
    int feature_maps = 0; // F, CNN only
    Pooling pooling = Pooling::none;
    int dense_width = 200; // CNN penultimate dense layer
    int num_classes = 10;
    double clip = 1.0;     // clipped-ReLU saturation

    static ModelSpec mlp(int L, int N);
    static ModelSpec cnn(int L, int C, int P, int F, Pooling pool);

    // Throws DomainError when the spatial extent would collapse below 1
    // through the conv+pool stages, or any field is out of range.
    void validate(std::size_t in_h = 28, std::size_t in_w = 28) const;

    // "mlp-2-200", "cnn-1-3-2-8-max"; nonstandard dense_width gets a
    // "-d<width>" suffix so ids stay unique.
    std::string name() const;
    static ModelSpec parse(const std::string& name);

    bool operator==(const ModelSpec&) const = default;
};

const char* pooling_name(Pooling p);
Pooling pooling_from_name(const std::string& s);

// One parameterized layer of the unrolled network, classification layer
// included. Conv layers carry their spatial bookkeeping; pool_size > 1
// means a max-pool runs after the activation.
struct LayerPlan {
    enum class Type { dense, conv };
    Type type = Type::dense;
    // dense
    std::size_t in = 0, out = 0;
    // conv
    std::size_t in_h = 0, in_w = 0, in_c = 0;
    std::size_t ksize = 0;
    std::size_t out_h = 0, out_w = 0, maps = 0;
    std::size_t pool_size = 1;
    std::size_t pooled_h = 0, pooled_w = 0;

    std::size_t weight_count() const;
    std::size_t bias_count() const;
    std::size_t output_size() const; // size fed to the next layer
};

std::vector<LayerPlan> plan_layers(const ModelSpec& spec,
                                   std::size_t in_h = 28,
                                   std::size_t in_w = 28);

// Exact count of all weight and bias scalars, classification layer
// included.
std::size_t count_params(const ModelSpec& spec);

// A spec bound to weight/bias tensors. Dense W is {out, in}; conv W is
// {C, C, in_c, F} matching the layer-algebra convention.
struct TrainedModel {
    ModelSpec spec;
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;

    std::size_t n_params() const;
};

std::size_t count_params(const TrainedModel& m);

// sqrt(6/(fan_in+fan_out)), the Glorot-uniform half-width.
double glorot_limit(std::size_t fan_in, std::size_t fan_out);

// Entries i.i.d. uniform on [-limit, +limit], addressed by element index
// so the draw order is irrelevant.
Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out, rng::Substream stream);

// Glorot-uniform weights, zero biases; layer l draws from its own
// substream of seed.
TrainedModel init_model(const ModelSpec& spec, std::uint64_t seed);

} // namespace faultlab
