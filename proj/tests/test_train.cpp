#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faultlab/error.hpp"
#include "faultlab/train.hpp"
#include "support.hpp"

using namespace faultlab;
using namespace testsup;
namespace tr = faultlab::train;

namespace {

idx::Dataset synth_set(std::size_t n, const char* tag) {
    TmpDir tmp(tag);
    write_synth_mnist(tmp.path, n, 16);
    return idx::load_dataset(tmp.path / "train-images-idx3-ubyte",
                             tmp.path / "train-labels-idx1-ubyte");
}

// Dense random images with no exact zeros: keeps every conv window
// generic so pre-activations sit away from the relu and pooling kinks.
idx::Dataset fd_dataset(std::size_t n, unsigned seed) {
    std::mt19937 g(seed);
    idx::Dataset d;
    d.images = random_tensor({n, 28, 28}, g, 0.02, 0.98);
    d.labels.resize(n);
    for (int& l : d.labels) l = static_cast<int>(g() % 10);
    d.one_hot = idx::one_hot(d.labels, 10);
    return d;
}

// Smallest distance of any hidden pre-activation to a clipped-ReLU kink
// (0 or clip), and of any pooling window's winner to its runner-up.
// Finite differences are only trustworthy when the h-ball around the
// base point stays inside one linear region.
double kink_margin(const TrainedModel& m, const idx::Dataset& data,
                   std::size_t batch_size, const tr::DropoutMasks& masks) {
    const auto plan = plan_layers(m.spec);
    double margin = 1e9;
    for (std::size_t s = 0; s < batch_size; ++s) {
        tr::ForwardTrace t = tr::trace_forward(m, data, s, masks, s);
        for (std::size_t l = 0; l + 1 < plan.size(); ++l) {
            const Tensor& z = t.pre[l];
            for (std::size_t i = 0; i < z.size(); ++i) {
                margin = std::min(margin, std::abs(z[i]));
                margin = std::min(margin, std::abs(m.spec.clip - z[i]));
            }
            if (plan[l].type == LayerPlan::Type::conv && plan[l].pool_size > 1) {
                const std::size_t P = plan[l].pool_size;
                const std::size_t H = plan[l].out_h, W = plan[l].out_w,
                                  F = plan[l].maps;
                Tensor h({H, W, F});
                for (std::size_t i = 0; i < h.size(); ++i)
                    h[i] = std::min(std::max(z[i], 0.0), m.spec.clip);
                for (std::size_t i = 0; i + P <= H; i += P)
                    for (std::size_t j = 0; j + P <= W; j += P)
                        for (std::size_t f = 0; f < F; ++f) {
                            double best = -1e9, second = -1e9;
                            for (std::size_t di = 0; di < P; ++di)
                                for (std::size_t dj = 0; dj < P; ++dj) {
                                    double v = h.at3(i + di, j + dj, f);
                                    if (v > best) {
                                        second = best;
                                        best = v;
                                    } else if (v > second) {
                                        second = v;
                                    }
                                }
                            // Ties among clamped values are flat on both
                            // sides; only an interior winner's gap to the
                            // runner-up limits differentiability.
                            if (best > 0.0 && best < m.spec.clip)
                                margin = std::min(margin, best - second);
                        }
            }
        }
    }
    return margin;
}

// Central finite differences over every parameter of the model (or a
// deterministic subset when stride > 1), checked against the analytic
// gradients at relative error 1e-4. Seeds whose base point sits within
// 1e-3 of an activation or pooling kink are skipped: there the loss is
// not differentiable and central differences measure nothing.
void check_gradients(const ModelSpec& spec, const tr::TrainConfig& cfg_in,
                     const idx::Dataset& data, std::size_t batch_size,
                     std::size_t stride = 1) {
    tr::TrainConfig cfg = cfg_in;
    std::vector<std::size_t> idx(batch_size);
    std::iota(idx.begin(), idx.end(), 0);

    TrainedModel m;
    tr::DropoutMasks masks;
    double margin = 0.0;
    for (int attempt = 0; attempt < 50; ++attempt) {
        m = init_model(spec, cfg.seed);
        masks = tr::sample_dropout_masks(spec, cfg, 0, batch_size);
        margin = kink_margin(m, data, batch_size, masks);
        if (margin > 5e-5) break;
        cfg.seed += 1000;
    }
    REQUIRE(margin > 5e-5);
    tr::BackwardResult res = tr::backward_with_masks(m, data, idx, masks);

    auto fd_at = [&](Tensor& param, std::size_t i, double h) {
        const double orig = param[i];
        param[i] = orig + h;
        double up = tr::batch_loss_with_masks(m, data, idx, masks);
        param[i] = orig - h;
        double down = tr::batch_loss_with_masks(m, data, idx, masks);
        param[i] = orig;
        return (up - down) / (2.0 * h);
    };

    const double h = 1e-5;
    std::size_t checked = 0, rescued = 0;
    auto check_tensor = [&](Tensor& param, const Tensor& grad) {
        for (std::size_t i = 0; i < param.size(); i += stride) {
            double fd = fd_at(param, i, h);
            double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
            if (std::abs(fd - grad[i]) / denom < 1e-4) {
                ++checked;
                continue;
            }
            // The h-ball straddled an activation/pooling kink: a genuine
            // gradient bug stays wrong at every step size, a kink
            // artifact vanishes as the window shrinks.
            double fd2 = fd_at(param, i, 1e-7);
            double denom2 = std::max({std::abs(fd2), std::abs(grad[i]), 1e-5});
            CHECK(std::abs(fd2 - grad[i]) / denom2 < 1e-3);
            ++checked;
            ++rescued;
        }
    };
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        check_tensor(m.weights[l], res.grads.weights[l]);
        check_tensor(m.biases[l], res.grads.biases[l]);
    }
    CHECK(checked > 0);
    // Kink straddles must stay rare or the base point was badly chosen.
    CHECK(rescued <= checked / 100 + 2);
}

} // namespace

TEST_CASE("dropout exemptions per layer") {
    tr::TrainConfig cfg;
    ModelSpec mlp = ModelSpec::mlp(3, 8);
    CHECK(tr::layer_dropout_rate(mlp, 0, cfg) == 0.0);
    CHECK(tr::layer_dropout_rate(mlp, 1, cfg) == 0.5);
    CHECK(tr::layer_dropout_rate(mlp, 2, cfg) == 0.5);
    CHECK(tr::layer_dropout_rate(mlp, 3, cfg) == 0.0); // classifier

    ModelSpec cnn = ModelSpec::cnn(2, 3, 2, 4, Pooling::max);
    CHECK(tr::layer_dropout_rate(cnn, 0, cfg) == 0.0);
    CHECK(tr::layer_dropout_rate(cnn, 1, cfg) == 0.25);
    CHECK(tr::layer_dropout_rate(cnn, 2, cfg) == 0.5); // dense hidden
    CHECK(tr::layer_dropout_rate(cnn, 3, cfg) == 0.0);

    // The sampled masks mirror the exemption: no mask on the first layer.
    auto masks = tr::sample_dropout_masks(cnn, cfg, 0, 4);
    CHECK(masks.keep[0].empty());
    CHECK(!masks.keep[1].empty());
    CHECK(!masks.keep[2].empty());
    CHECK(masks.keep[3].empty());
}

TEST_CASE("first layer's training output is mask-free") {
    idx::Dataset data = synth_set(4, "trace");
    ModelSpec spec = ModelSpec::cnn(2, 3, 2, 3, Pooling::max);
    tr::TrainConfig cfg;
    cfg.seed = 5;
    TrainedModel m = init_model(spec, cfg.seed);

    auto dropped = tr::sample_dropout_masks(spec, cfg, 0, 1);
    auto clean = dropped;
    for (auto& k : clean.keep) std::fill(k.begin(), k.end(), 1);
    for (auto& r : clean.rate) r = 0.0;

    tr::ForwardTrace with = tr::trace_forward(m, data, 0, dropped, 0);
    tr::ForwardTrace without = tr::trace_forward(m, data, 0, clean, 0);
    CHECK(with.out[0] == without.out[0]);   // exempt first layer
    CHECK(!(with.out[1] == without.out[1])); // dropout visible deeper
}

TEST_CASE("inverted dropout arithmetic") {
    Tensor x({2}, {2.0, 2.0});
    Tensor y = tr::apply_dropout(x, 0.5, std::vector<std::uint8_t>{1, 0});
    CHECK(y[0] == 4.0);
    CHECK(y[1] == 0.0);

    Tensor same = tr::apply_dropout(
        x, 0.0, rng::substream(1, rng::Domain::dropout, 0, 0));
    CHECK(same == x);

    CHECK_THROWS_AS(tr::apply_dropout(x, 1.0, std::vector<std::uint8_t>{1, 1}),
                    DomainError);
}

TEST_CASE("dropout keeps the expectation") {
    const std::size_t n = 100000;
    Tensor ones({n}, std::vector<double>(n, 1.0));
    Tensor y = tr::apply_dropout(ones, 0.25,
                                 rng::substream(3, rng::Domain::dropout, 1, 0));
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y[i];
    mean /= n;
    CHECK(std::abs(mean - 1.0) <= 0.02);
}

TEST_CASE("cross-entropy examples") {
    Tensor perfect({2, 3}, {1, 0, 0, 0, 0, 1});
    CHECK(tr::crossentropy_loss(perfect, perfect) == 0.0);

    Tensor uniform({1, 10}, std::vector<double>(10, 0.1));
    Tensor t({1, 10});
    t[3] = 1.0;
    CHECK(tr::crossentropy_loss(uniform, t) ==
          doctest::Approx(std::log(10.0)).epsilon(1e-12));

    // Two-sample batch averages the per-sample losses.
    Tensor probs({2, 2}, {0.8, 0.2, 0.4, 0.6});
    Tensor targets({2, 2}, {1, 0, 0, 1});
    double l1 = -std::log(0.8), l2 = -std::log(0.6);
    CHECK(tr::crossentropy_loss(probs, targets) ==
          doctest::Approx((l1 + l2) / 2).epsilon(1e-12));

    CHECK_THROWS_AS(tr::crossentropy_loss(probs, perfect), ShapeError);
}

TEST_CASE("adadelta first step matches the closed form") {
    TrainedModel m;
    m.spec = ModelSpec::mlp(1, 1);
    m.weights.push_back(Tensor({1}, {0.0}));
    m.biases.push_back(Tensor({1}, {0.0}));
    tr::Gradients g = tr::Gradients::like(m);
    g.weights[0][0] = 1.0;
    tr::AdadeltaState st = tr::AdadeltaState::like(m);
    tr::adadelta_update(m, g, st, 0.95, 1e-6);
    CHECK(st.eg2_w[0][0] == doctest::Approx(0.05).epsilon(1e-15));
    // -sqrt(1e-6 / (0.05 + 1e-6)), frozen from 40-digit decimal arithmetic.
    CHECK(m.weights[0][0] ==
          doctest::Approx(-0.004472091234310839).epsilon(1e-9));

    // Odd symmetry: g = -1 gives the opposite step.
    TrainedModel m2 = m;
    m2.weights[0][0] = 0.0;
    tr::Gradients g2 = tr::Gradients::like(m2);
    g2.weights[0][0] = -1.0;
    tr::AdadeltaState st2 = tr::AdadeltaState::like(m2);
    tr::adadelta_update(m2, g2, st2, 0.95, 1e-6);
    CHECK(m2.weights[0][0] ==
          doctest::Approx(0.004472091234310839).epsilon(1e-9));
}

TEST_CASE("adadelta zero gradient only decays the accumulators") {
    TrainedModel m;
    m.spec = ModelSpec::mlp(1, 1);
    m.weights.push_back(Tensor({1}, {0.5}));
    m.biases.push_back(Tensor({1}, {0.0}));
    tr::AdadeltaState st = tr::AdadeltaState::like(m);
    st.eg2_w[0][0] = 1.0;
    st.edx2_w[0][0] = 0.25;
    tr::Gradients g = tr::Gradients::like(m); // all zero
    tr::adadelta_update(m, g, st, 0.95, 1e-6);
    CHECK(m.weights[0][0] == 0.5);
    CHECK(st.eg2_w[0][0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(st.edx2_w[0][0] == doctest::Approx(0.2375).epsilon(1e-15));
}

TEST_CASE("uniform-probability gradient at zero weights") {
    // Zero weights -> uniform softmax; the output bias gradient is
    // mean(probs - targets) = 0.1 - class frequency.
    idx::Dataset data = synth_set(8, "grad0");
    data.labels = {0, 0, 1, 2, 3, 4, 5, 6};
    data.one_hot = idx::one_hot(data.labels, 10);
    TrainedModel m = init_model(ModelSpec::mlp(1, 5), 2);
    for (Tensor& w : m.weights)
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.0;
    std::vector<std::size_t> idxs(8);
    std::iota(idxs.begin(), idxs.end(), 0);
    tr::TrainConfig cfg;
    auto res = tr::backward(m, data, idxs, cfg, 0);
    const Tensor& gb = res.grads.biases[1];
    CHECK(gb[0] == doctest::Approx(0.1 - 2.0 / 8).epsilon(1e-12));
    CHECK(gb[1] == doctest::Approx(0.1 - 1.0 / 8).epsilon(1e-12));
    CHECK(gb[9] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("saturated units pass no gradient") {
    idx::Dataset data = synth_set(4, "gradsat");
    TrainedModel m = init_model(ModelSpec::mlp(1, 3), 4);
    // Huge positive bias saturates unit 0 past the clip for any input.
    m.biases[0][0] = 50.0;
    std::vector<std::size_t> idxs = {0, 1, 2, 3};
    tr::TrainConfig cfg;
    auto res = tr::backward(m, data, idxs, cfg, 0);
    for (std::size_t c = 0; c < 784; ++c)
        CHECK(res.grads.weights[0].at2(0, c) == 0.0);
    CHECK(res.grads.biases[0][0] == 0.0);
}

TEST_CASE("gradients match finite differences: MLP-1-5, every component") {
    idx::Dataset data = fd_dataset(8, 101);
    tr::TrainConfig cfg;
    cfg.seed = 11;
    check_gradients(ModelSpec::mlp(1, 5), cfg, data, 4);
}

TEST_CASE("gradients match finite differences: MLP-2-6 with dropout") {
    idx::Dataset data = fd_dataset(8, 102);
    tr::TrainConfig cfg;
    cfg.seed = 12;
    check_gradients(ModelSpec::mlp(2, 6), cfg, data, 4);
    // And with dropout disabled.
    cfg.dropout_dense = 0.0;
    check_gradients(ModelSpec::mlp(2, 6), cfg, data, 4);
}

TEST_CASE("gradients match finite differences: small CNN, every component") {
    idx::Dataset data = fd_dataset(4, 103);
    ModelSpec spec = ModelSpec::cnn(1, 3, 1, 2, Pooling::none);
    spec.dense_width = 8; // full-coverage finite differences stay fast
    tr::TrainConfig cfg;
    cfg.seed = 13;
    check_gradients(spec, cfg, data, 2);
    cfg.dropout_conv = 0.0;
    cfg.dropout_dense = 0.0;
    check_gradients(spec, cfg, data, 2);
}

TEST_CASE("gradients match finite differences: pooled CNN") {
    idx::Dataset data = fd_dataset(4, 104);
    ModelSpec spec = ModelSpec::cnn(2, 3, 2, 3, Pooling::max);
    spec.dense_width = 8;
    tr::TrainConfig cfg;
    cfg.seed = 14;
    check_gradients(spec, cfg, data, 2, /*stride=*/3);
}

TEST_CASE("train rejects bad configs and counts steps") {
    idx::Dataset data = synth_set(256, "steps");
    tr::TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(tr::train(ModelSpec::mlp(1, 4), data, data, cfg),
                    DomainError);
    cfg.epochs = 1;
    cfg.seed = 3;
    auto res = tr::train(ModelSpec::mlp(1, 4), data, data, cfg);
    CHECK(res.steps_run == 2); // ceil(256/128)
    CHECK(res.epoch_loss.size() == 1);
}

TEST_CASE("training is deterministic in the seed") {
    idx::Dataset data = synth_set(96, "det");
    tr::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 32;
    cfg.seed = 1234;
    auto a = tr::train(ModelSpec::mlp(1, 6), data, data, cfg);
    auto b = tr::train(ModelSpec::mlp(1, 6), data, data, cfg);
    for (std::size_t l = 0; l < a.model.weights.size(); ++l) {
        CHECK(a.model.weights[l] == b.model.weights[l]);
        CHECK(a.model.biases[l] == b.model.biases[l]);
    }
    CHECK(a.epoch_loss == b.epoch_loss);

    cfg.seed = 1235;
    auto c = tr::train(ModelSpec::mlp(1, 6), data, data, cfg);
    CHECK(!(a.model.weights[0] == c.model.weights[0]));
}

TEST_CASE("training loss falls on a learnable set") {
    idx::Dataset data = synth_set(512, "learn");
    tr::TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 9;
    auto res = tr::train(ModelSpec::mlp(1, 16), data, data, cfg);
    CHECK(res.epoch_loss.back() < res.epoch_loss.front());
    CHECK(res.clean_test_error < 0.9);
}
