#include <cmath>
#include <cstring>

#include "faultlab/kernels.hpp"

namespace faultlab::kernels {
namespace {

void matvec_scalar(const double* W, const double* x, const double* b,
                   double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* w = W + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
        y[r] = acc + (b ? b[r] : 0.0);
    }
}

void matvec_t_scalar(const double* W, const double* g, double* dx,
                     std::size_t rows, std::size_t cols) {
    std::memset(dx, 0, cols * sizeof(double));
    for (std::size_t r = 0; r < rows; ++r) {
        const double* w = W + r * cols;
        double gr = g[r];
        for (std::size_t c = 0; c < cols; ++c) dx[c] += gr * w[c];
    }
}

void ger_acc_scalar(double* dW, const double* g, const double* x,
                    std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* w = dW + r * cols;
        double gr = g[r];
        for (std::size_t c = 0; c < cols; ++c) w[c] += gr * x[c];
    }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void clipped_relu_scalar(const double* x, double* y, std::size_t n,
                         double clip) {
    for (std::size_t i = 0; i < n; ++i) {
        double v = x[i];
        v = v > 0.0 ? v : 0.0;
        y[i] = v < clip ? v : clip;
    }
}

void relu_cut_grad_scalar(const double* dh, const double* z, double* out,
                          std::size_t n, double clip) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = (z[i] > 0.0 && z[i] < clip) ? dh[i] : 0.0;
}

void adadelta_step_scalar(double* p, const double* g, double* eg2,
                          double* edx2, std::size_t n, double rho,
                          double eps) {
    const double om = 1.0 - rho;
    for (std::size_t i = 0; i < n; ++i) {
        double gi = g[i];
        eg2[i] = rho * eg2[i] + om * (gi * gi);
        double num = std::sqrt(edx2[i] + eps);
        double den = std::sqrt(eg2[i] + eps);
        double d = -(num / den) * gi;
        edx2[i] = rho * edx2[i] + om * (d * d);
        p[i] += d;
    }
}

} // namespace

namespace detail {

const KernelTable& scalar_table() {
    static const KernelTable t = {
        matvec_scalar,     matvec_t_scalar, ger_acc_scalar,
        dot_scalar,        axpy_scalar,     clipped_relu_scalar,
        relu_cut_grad_scalar, adadelta_step_scalar,
    };
    return t;
}

} // namespace detail
} // namespace faultlab::kernels
