#include "faultlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faultlab/error.hpp"
#include "faultlab/infer.hpp"
#include "faultlab/kernels.hpp"
#include "faultlab/ops.hpp"

namespace faultlab::train {

void TrainConfig::validate() const {
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (!(dropout_conv >= 0.0 && dropout_conv < 1.0))
        throw DomainError("dropout_conv rate " + std::to_string(dropout_conv) +
                          " outside [0,1)");
    if (!(dropout_dense >= 0.0 && dropout_dense < 1.0))
        throw DomainError("dropout_dense rate " + std::to_string(dropout_dense) +
                          " outside [0,1)");
    if (!(adadelta_rho >= 0.0 && adadelta_rho < 1.0))
        throw DomainError("adadelta_rho outside [0,1)");
    if (!(adadelta_eps > 0.0)) throw DomainError("adadelta_eps must be positive");
}

double layer_dropout_rate(const ModelSpec& spec, std::size_t layer,
                          const TrainConfig& cfg) {
    std::size_t nlayers = static_cast<std::size_t>(spec.layers) +
                          (spec.kind == ModelKind::mlp ? 1 : 2);
    // First layer and classification layer never drop.
    if (layer == 0 || layer + 1 >= nlayers) return 0.0;
    if (spec.kind == ModelKind::mlp) return cfg.dropout_dense;
    return layer < static_cast<std::size_t>(spec.layers) ? cfg.dropout_conv
                                                         : cfg.dropout_dense;
}

namespace {

void check_rate(double rate) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw DomainError("dropout rate " + std::to_string(rate) +
                          " outside [0,1)");
}

} // namespace

Tensor apply_dropout(const Tensor& x, double rate,
                     const std::vector<std::uint8_t>& keep) {
    check_rate(rate);
    if (keep.size() != x.size())
        throw ShapeError("dropout mask length " + std::to_string(keep.size()) +
                         " vs tensor " + shape_str(x.shape()));
    if (rate == 0.0) return x;
    Tensor y(x.shape());
    const double scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = keep[i] ? x[i] * scale : 0.0;
    return y;
}

Tensor apply_dropout(const Tensor& x, double rate, rng::Substream stream) {
    check_rate(rate);
    if (rate == 0.0) return x;
    std::vector<std::uint8_t> keep(x.size());
    for (std::size_t i = 0; i < keep.size(); ++i)
        keep[i] = stream.unit_at(i) >= rate;
    return apply_dropout(x, rate, keep);
}

double crossentropy_loss(const Tensor& probs, const Tensor& targets) {
    if (probs.rank() != 2 || !probs.same_shape(targets))
        throw ShapeError("crossentropy_loss: probs " + shape_str(probs.shape()) +
                         " vs targets " + shape_str(targets.shape()));
    const std::size_t B = probs.extent(0), K = probs.extent(1);
    double sum = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        double p_true =
            kernels::dot(probs.data() + i * K, targets.data() + i * K, K);
        sum += -std::log(std::max(p_true, 1e-12));
    }
    return sum / static_cast<double>(B);
}

Gradients Gradients::like(const TrainedModel& m) {
    Gradients g;
    for (const Tensor& w : m.weights) g.weights.emplace_back(w.shape());
    for (const Tensor& b : m.biases) g.biases.emplace_back(b.shape());
    return g;
}

DropoutMasks sample_dropout_masks(const ModelSpec& spec, const TrainConfig& cfg,
                                  std::uint32_t step, std::size_t slots) {
    auto plan = plan_layers(spec);
    DropoutMasks m;
    m.rate.resize(plan.size(), 0.0);
    m.keep.resize(plan.size());
    for (std::size_t l = 0; l < plan.size(); ++l) {
        double rate = layer_dropout_rate(spec, l, cfg);
        m.rate[l] = rate;
        if (rate == 0.0) continue;
        std::size_t n = slots * plan[l].output_size();
        auto stream = rng::substream(cfg.seed, rng::Domain::dropout,
                                     static_cast<std::uint32_t>(l), step);
        auto& keep = m.keep[l];
        keep.resize(n);
        for (std::size_t e = 0; e < n; ++e) keep[e] = stream.unit_at(e) >= rate;
    }
    return m;
}

namespace {

struct LayerCache {
    Tensor input; // layer input, canonical rank
    Tensor z;     // pre-activation
    std::vector<std::size_t> winners;
};

// Forward pass for one sample that retains what backward needs. Dropout
// masks index by (slot, unit) within the step's keep arrays.
Tensor forward_cached(const TrainedModel& m,
                      const std::vector<LayerPlan>& plan, Tensor x,
                      const DropoutMasks& masks, std::size_t slot,
                      std::vector<LayerCache>& caches) {
    if (m.spec.kind == ModelKind::mlp) {
        if (x.rank() != 1) x = ops::reshape(std::move(x), {x.size()});
    } else if (x.rank() == 2) {
        x = ops::reshape(std::move(x), {x.extent(0), x.extent(1), 1});
    }
    for (std::size_t l = 0; l < plan.size(); ++l) {
        const LayerPlan& p = plan[l];
        LayerCache& c = caches[l];
        if (p.type == LayerPlan::Type::dense && x.rank() != 1)
            x = ops::reshape(std::move(x), {x.size()});
        c.input = std::move(x);
        c.z = p.type == LayerPlan::Type::dense
                  ? ops::dense_forward(c.input, m.weights[l], m.biases[l])
                  : ops::conv2d_forward(c.input, m.weights[l], m.biases[l]);
        if (l + 1 == plan.size()) return ops::softmax(c.z);
        Tensor out = ops::clipped_relu(c.z, m.spec.clip);
        if (p.type == LayerPlan::Type::conv && p.pool_size > 1)
            out = ops::max_pool_with_winners(out, p.pool_size, c.winners);
        if (masks.rate[l] > 0.0) {
            const auto& keep = masks.keep[l];
            const double scale = 1.0 / (1.0 - masks.rate[l]);
            const std::size_t base = slot * out.size();
            for (std::size_t e = 0; e < out.size(); ++e)
                out[e] = keep[base + e] ? out[e] * scale : 0.0;
        }
        x = std::move(out);
    }
    throw Error("unreachable: empty layer plan");
}

void conv_backward(const Tensor& a, const Tensor& W, const Tensor& dz,
                   Tensor& gW, Tensor& gb, Tensor* da) {
    const std::size_t Cin = a.extent(2);
    const std::size_t C = W.extent(0), F = W.extent(3);
    const std::size_t Ho = dz.extent(0), Wo = dz.extent(1);
    for (std::size_t i = 0; i < Ho; ++i) {
        for (std::size_t j = 0; j < Wo; ++j) {
            const double* dzrow = &dz.at3(i, j, 0);
            kernels::axpy(1.0, dzrow, gb.data(), F);
            for (std::size_t ki = 0; ki < C; ++ki) {
                const double* arow = &a.at3(i + ki, j, 0);
                const double* wrow = &W.at4(ki, 0, 0, 0);
                double* gwrow = &gW.at4(ki, 0, 0, 0);
                double* darow = da ? &da->at3(i + ki, j, 0) : nullptr;
                for (std::size_t t = 0; t < C * Cin; ++t) {
                    kernels::axpy(arow[t], dzrow, gwrow + t * F, F);
                    if (darow) darow[t] += kernels::dot(wrow + t * F, dzrow, F);
                }
            }
        }
    }
}

void scale_inplace(Tensor& t, double s) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= s;
}

BackwardResult run_batch(const TrainedModel& m, const idx::Dataset& data,
                         std::span<const std::size_t> indices,
                         const DropoutMasks& masks, bool want_grads) {
    if (indices.empty()) throw DomainError("empty batch");
    const auto plan = plan_layers(m.spec);
    BackwardResult res;
    if (want_grads) res.grads = Gradients::like(m);
    std::vector<LayerCache> caches(plan.size());
    double loss_sum = 0.0;
    for (std::size_t slot = 0; slot < indices.size(); ++slot) {
        const std::size_t idx = indices[slot];
        Tensor probs = forward_cached(m, plan, ops::image_at(data.images, idx),
                                      masks, slot, caches);
        const auto label = static_cast<std::size_t>(data.labels[idx]);
        loss_sum += -std::log(std::max(probs[label], 1e-12));
        if (!want_grads) continue;

        // Softmax + cross-entropy gradient w.r.t. the logits.
        Tensor delta = std::move(probs);
        delta[label] -= 1.0;

        for (std::size_t l = plan.size(); l-- > 0;) {
            const LayerPlan& p = plan[l];
            LayerCache& c = caches[l];
            Tensor da;
            if (p.type == LayerPlan::Type::dense) {
                kernels::ger_acc(res.grads.weights[l].data(), delta.data(),
                                 c.input.data(), p.out, p.in);
                kernels::axpy(1.0, delta.data(), res.grads.biases[l].data(),
                              p.out);
                if (l == 0) break;
                da = Tensor({p.in});
                kernels::matvec_t(m.weights[l].data(), delta.data(), da.data(),
                                  p.out, p.in);
            } else {
                da = l > 0 ? Tensor(c.input.shape()) : Tensor();
                conv_backward(c.input, m.weights[l], delta,
                              res.grads.weights[l], res.grads.biases[l],
                              l > 0 ? &da : nullptr);
                if (l == 0) break;
            }

            // da holds the gradient w.r.t. layer l-1's output; walk it
            // back through dropout, pooling and the activation.
            const std::size_t prev = l - 1;
            LayerCache& pc = caches[prev];
            if (masks.rate[prev] > 0.0) {
                const auto& keep = masks.keep[prev];
                const double scale = 1.0 / (1.0 - masks.rate[prev]);
                const std::size_t base = slot * da.size();
                for (std::size_t e = 0; e < da.size(); ++e)
                    da[e] = keep[base + e] ? da[e] * scale : 0.0;
            }
            Tensor dh;
            if (plan[prev].type == LayerPlan::Type::conv &&
                plan[prev].pool_size > 1) {
                dh = Tensor(pc.z.shape());
                for (std::size_t o = 0; o < da.size(); ++o)
                    dh[pc.winners[o]] += da[o];
            } else {
                dh = ops::reshape(std::move(da), pc.z.shape());
            }
            delta = Tensor(pc.z.shape());
            kernels::relu_cut_grad(dh.data(), pc.z.data(), delta.data(),
                                   delta.size(), m.spec.clip);
        }
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    res.loss = loss_sum * inv;
    if (want_grads) {
        for (Tensor& t : res.grads.weights) scale_inplace(t, inv);
        for (Tensor& t : res.grads.biases) scale_inplace(t, inv);
    }
    return res;
}

} // namespace

BackwardResult backward_with_masks(const TrainedModel& m,
                                   const idx::Dataset& data,
                                   std::span<const std::size_t> indices,
                                   const DropoutMasks& masks) {
    return run_batch(m, data, indices, masks, true);
}

double batch_loss_with_masks(const TrainedModel& m, const idx::Dataset& data,
                             std::span<const std::size_t> indices,
                             const DropoutMasks& masks) {
    return run_batch(m, data, indices, masks, false).loss;
}

BackwardResult backward(const TrainedModel& m, const idx::Dataset& data,
                        std::span<const std::size_t> indices,
                        const TrainConfig& cfg, std::uint32_t step) {
    DropoutMasks masks =
        sample_dropout_masks(m.spec, cfg, step, indices.size());
    return backward_with_masks(m, data, indices, masks);
}

ForwardTrace trace_forward(const TrainedModel& m, const idx::Dataset& data,
                           std::size_t sample, const DropoutMasks& masks,
                           std::size_t slot) {
    const auto plan = plan_layers(m.spec);
    std::vector<LayerCache> caches(plan.size());
    ForwardTrace t;
    t.probs = forward_cached(m, plan, ops::image_at(data.images, sample),
                             masks, slot, caches);
    for (std::size_t l = 0; l < plan.size(); ++l) {
        t.pre.push_back(caches[l].z);
        if (l + 1 < plan.size()) t.out.push_back(caches[l + 1].input);
    }
    return t;
}

AdadeltaState AdadeltaState::like(const TrainedModel& m) {
    AdadeltaState st;
    for (const Tensor& w : m.weights) {
        st.eg2_w.emplace_back(w.shape());
        st.edx2_w.emplace_back(w.shape());
    }
    for (const Tensor& b : m.biases) {
        st.eg2_b.emplace_back(b.shape());
        st.edx2_b.emplace_back(b.shape());
    }
    return st;
}

void adadelta_update(TrainedModel& m, const Gradients& g, AdadeltaState& st,
                     double rho, double eps) {
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        require_same_shape(m.weights[l], g.weights[l], "adadelta_update");
        kernels::adadelta_step(m.weights[l].data(), g.weights[l].data(),
                               st.eg2_w[l].data(), st.edx2_w[l].data(),
                               m.weights[l].size(), rho, eps);
        kernels::adadelta_step(m.biases[l].data(), g.biases[l].data(),
                               st.eg2_b[l].data(), st.edx2_b[l].data(),
                               m.biases[l].size(), rho, eps);
    }
}

TrainResult train(const ModelSpec& spec, const idx::Dataset& train_data,
                  const idx::Dataset& test_data, const TrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (train_data.count() == 0) throw DomainError("empty training set");

    TrainResult res;
    res.model = init_model(spec, cfg.seed);
    AdadeltaState state = AdadeltaState::like(res.model);

    const std::size_t N = train_data.count();
    const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t steps = (N + B - 1) / B;
    std::vector<std::size_t> order(N);
    std::uint32_t global_step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng::Stream shuffle(rng::substream(cfg.seed, rng::Domain::shuffle, 0,
                                           static_cast<std::uint32_t>(epoch)));
        for (std::size_t i = N; i-- > 1;)
            std::swap(order[i], order[shuffle.next_below(
                                    static_cast<std::uint32_t>(i + 1))]);

        double loss_sum = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            const std::size_t lo = s * B;
            const std::size_t hi = std::min(N, lo + B);
            std::span<const std::size_t> batch(order.data() + lo, hi - lo);
            BackwardResult br = backward(res.model, train_data, batch, cfg,
                                         global_step);
            if (!std::isfinite(br.loss))
                throw DivergenceError("non-finite training loss at epoch " +
                                      std::to_string(epoch) + ", batch " +
                                      std::to_string(s));
            adadelta_update(res.model, br.grads, state, cfg.adadelta_rho,
                            cfg.adadelta_eps);
            loss_sum += br.loss * static_cast<double>(hi - lo);
            ++global_step;
        }
        res.epoch_loss.push_back(loss_sum / static_cast<double>(N));
    }
    res.steps_run = global_step;
    res.clean_test_error =
        test_data.count() ? clean_error_rate(res.model, test_data) : 0.0;
    return res;
}

} // namespace faultlab::train
