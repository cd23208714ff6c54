#include "faultlab/infer.hpp"

#include "faultlab/error.hpp"
#include "faultlab/ops.hpp"

namespace faultlab {

namespace {

// Canonicalize the input tensor for the model family: MLP consumes the
// flattened vector, CNN the {H,W,1} plane.
Tensor canonical_input(const ModelSpec& spec, const Tensor& x) {
    if (spec.kind == ModelKind::mlp) {
        if (x.rank() == 1) return x;
        return ops::reshape(x, {x.size()});
    }
    if (x.rank() == 3) return x;
    if (x.rank() == 2) return ops::reshape(x, {x.extent(0), x.extent(1), 1});
    throw ShapeError("CNN input must be rank 2 or 3, got " + shape_str(x.shape()));
}

struct NoInject {
    void operator()(std::size_t, Tensor&) const {}
};

struct FaultInject {
    const fault::DeviationConfig& dev;
    const EvalContext& ctx;
    const ForcedMasks* forced;

    void operator()(std::size_t layer, Tensor& z) const {
        if (dev.kind == fault::DeviationConfig::Kind::none) return;
        fault::FaultStream fs{ctx.key, ctx.input_index, ctx.realization,
                              static_cast<std::uint32_t>(layer)};
        std::vector<std::uint8_t> sampled;
        const std::vector<std::uint8_t>* mask = nullptr;
        if (forced) {
            auto it = forced->by_layer.find(layer);
            if (it != forced->by_layer.end()) mask = &it->second;
        }
        if (!mask) {
            sampled = fault::sample_deviation_mask(z.size(), dev.p, fs);
            mask = &sampled;
        }
        if (dev.kind == fault::DeviationConfig::Kind::conditionally_uniform)
            fault::apply_conditionally_uniform_inplace(z, *mask, dev.range_lo,
                                                       dev.range_hi, fs);
        else
            fault::apply_erasure_inplace(z, *mask);
    }
};

template <class Inject>
Tensor forward_impl(const TrainedModel& m, const Tensor& x, Inject&& inject) {
    const auto plan = plan_layers(m.spec, x.rank() >= 2 ? x.extent(0) : 28,
                                  x.rank() >= 2 ? x.extent(1) : 28);
    Tensor a = canonical_input(m.spec, x);
    for (std::size_t l = 0; l < plan.size(); ++l) {
        const LayerPlan& p = plan[l];
        const bool last = l + 1 == plan.size();
        Tensor z;
        if (p.type == LayerPlan::Type::dense) {
            if (a.rank() != 1) a = ops::reshape(std::move(a), {a.size()});
            z = ops::dense_forward(a, m.weights[l], m.biases[l]);
        } else {
            z = ops::conv2d_forward(a, m.weights[l], m.biases[l]);
        }
        inject(l, z);
        if (last) return ops::softmax(z);
        Tensor h = ops::clipped_relu(z, m.spec.clip);
        if (p.type == LayerPlan::Type::conv && p.pool_size > 1)
            h = ops::max_pool(h, p.pool_size);
        a = std::move(h);
    }
    throw Error("unreachable: empty layer plan");
}

} // namespace

Tensor forward_clean(const TrainedModel& m, const Tensor& x) {
    return forward_impl(m, x, NoInject{});
}

Tensor forward(const TrainedModel& m, const Tensor& x,
               const fault::DeviationConfig& dev, const EvalContext& ctx,
               const ForcedMasks* forced) {
    dev.validate();
    return forward_impl(m, x, FaultInject{dev, ctx, forced});
}

std::size_t predict(const Tensor& probs) { return ops::argmax(probs); }

double clean_error_rate(const TrainedModel& m, const idx::Dataset& data) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < data.count(); ++i) {
        Tensor probs = forward_clean(m, ops::image_at(data.images, i));
        wrong += predict(probs) != static_cast<std::size_t>(data.labels[i]);
    }
    return static_cast<double>(wrong) / static_cast<double>(data.count());
}

} // namespace faultlab
