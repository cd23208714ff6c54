#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "faultlab/error.hpp"
#include "faultlab/kernels.hpp"
#include "faultlab/ops.hpp"

namespace faultlab::ops {

Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (W.rank() != 2 || x.rank() != 1 || b.rank() != 1 ||
        W.extent(1) != x.extent(0) || W.extent(0) != b.extent(0))
        throw ShapeError("dense_forward: W " + shape_str(W.shape()) + " vs x " +
                         shape_str(x.shape()) + ", b " + shape_str(b.shape()));
    Tensor y({W.extent(0)});
    kernels::matvec(W.data(), x.data(), b.data(), y.data(), W.extent(0),
                    W.extent(1));
    return y;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (x.rank() != 3 || W.rank() != 4 || b.rank() != 1)
        throw ShapeError("conv2d_forward: need x rank 3, W rank 4, b rank 1; got x " +
                         shape_str(x.shape()) + ", W " + shape_str(W.shape()) +
                         ", b " + shape_str(b.shape()));
    const std::size_t H = x.extent(0), Wd = x.extent(1), Cin = x.extent(2);
    const std::size_t C = W.extent(0), F = W.extent(3);
    if (W.extent(1) != C || W.extent(2) != Cin || b.extent(0) != F)
        throw ShapeError("conv2d_forward: W " + shape_str(W.shape()) +
                         " inconsistent with x " + shape_str(x.shape()) + ", b " +
                         shape_str(b.shape()));
    if (H < C || Wd < C)
        throw ShapeError("conv2d_forward: kernel " + shape_str(W.shape()) +
                         " larger than input " + shape_str(x.shape()));
    const std::size_t Ho = H - C + 1, Wo = Wd - C + 1;
    Tensor z({Ho, Wo, F});
    for (std::size_t i = 0; i < Ho; ++i) {
        for (std::size_t j = 0; j < Wo; ++j) {
            double* zrow = &z.at3(i, j, 0);
            std::memcpy(zrow, b.data(), F * sizeof(double));
            for (std::size_t ki = 0; ki < C; ++ki) {
                const double* xrow = &x.at3(i + ki, j, 0);
                const double* wrow = &W.at4(ki, 0, 0, 0);
                // (kj, ci) runs over a contiguous Cin*C window of x and a
                // contiguous F-strided panel of W.
                for (std::size_t t = 0; t < C * Cin; ++t)
                    kernels::axpy(xrow[t], wrow + t * F, zrow, F);
            }
        }
    }
    return z;
}

Tensor max_pool(const Tensor& x, std::size_t P) {
    std::vector<std::size_t> winners;
    return max_pool_with_winners(x, P, winners);
}

Tensor max_pool_with_winners(const Tensor& x, std::size_t P,
                             std::vector<std::size_t>& winners) {
    if (P == 0) throw DomainError("max_pool: P must be >= 1");
    if (x.rank() != 3)
        throw ShapeError("max_pool: need rank-3 input, got " + shape_str(x.shape()));
    const std::size_t H = x.extent(0), W = x.extent(1), F = x.extent(2);
    const std::size_t Ho = H / P, Wo = W / P;
    if (Ho == 0 || Wo == 0)
        throw ShapeError("max_pool: window " + std::to_string(P) +
                         " larger than input " + shape_str(x.shape()));
    Tensor out({Ho, Wo, F});
    winners.assign(Ho * Wo * F, 0);
    for (std::size_t i = 0; i < Ho; ++i) {
        for (std::size_t j = 0; j < Wo; ++j) {
            for (std::size_t f = 0; f < F; ++f) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_idx = 0;
                for (std::size_t di = 0; di < P; ++di) {
                    for (std::size_t dj = 0; dj < P; ++dj) {
                        std::size_t idx =
                            ((i * P + di) * W + (j * P + dj)) * F + f;
                        if (x[idx] > best) {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                std::size_t o = (i * Wo + j) * F + f;
                out[o] = best;
                winners[o] = best_idx;
            }
        }
    }
    return out;
}

Tensor clipped_relu(const Tensor& x, double clip) {
    Tensor y(x.shape());
    kernels::clipped_relu(x.data(), y.data(), x.size(), clip);
    return y;
}

Tensor softmax(const Tensor& z) {
    if (z.rank() != 1)
        throw ShapeError("softmax: need rank-1 input, got " + shape_str(z.shape()));
    Tensor p(z.shape());
    double m = z[0];
    for (std::size_t i = 1; i < z.size(); ++i) m = std::max(m, z[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        sum += p[i];
    }
    for (std::size_t i = 0; i < z.size(); ++i) p[i] /= sum;
    return p;
}

std::size_t argmax(const Tensor& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

Tensor image_at(const Tensor& images, std::size_t i) {
    const std::size_t rows = images.extent(1), cols = images.extent(2);
    const double* p = images.data() + i * rows * cols;
    return Tensor({rows, cols}, std::vector<double>(p, p + rows * cols));
}

Tensor reshape(Tensor t, std::vector<std::size_t> shape) {
    std::size_t n = shape.empty() ? 0 : 1;
    for (std::size_t e : shape) n *= e;
    if (n != t.size())
        throw ShapeError("reshape: " + shape_str(t.shape()) + " to " +
                         shape_str(shape) + " changes element count");
    std::vector<double> data(t.data(), t.data() + t.size());
    return Tensor(std::move(shape), std::move(data));
}

} // namespace faultlab::ops
