#pragma once

#include <cstddef>

namespace faultlab::kernels {

// Inner-loop arithmetic kernels. Scalar versions are the reference; an
// AVX2+FMA variant is selected at runtime when the CPU supports it.
// Elementwise kernels (clipped_relu, relu_cut_grad, adadelta_step) are
// bitwise identical across backends. Reduction kernels (dot, matvec) and
// FMA-contracted kernels (axpy, ger_acc, matvec_t) may differ from the
// scalar reference in the last ulps; equivalence tests bound the gap.

enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_available(Backend b);
// Throws DomainError if the backend is not available on this CPU.
// Intended for tests and for the FAULTLAB_KERNELS=scalar|avx2 override.
void force_backend(Backend b);
const char* backend_name(Backend b);

// y = W x + b, W row-major rows x cols. b may be null (treated as zero).
void matvec(const double* W, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols);

// dx = W^T g (overwrites dx).
void matvec_t(const double* W, const double* g, double* dx, std::size_t rows,
              std::size_t cols);

// dW += g x^T (rank-1 accumulate).
void ger_acc(double* dW, const double* g, const double* x, std::size_t rows,
             std::size_t cols);

double dot(const double* a, const double* b, std::size_t n);

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);

// y[i] = min(max(x[i], 0), clip)
void clipped_relu(const double* x, double* y, std::size_t n, double clip);

// out[i] = dh[i] where 0 < z[i] < clip, else 0. The clamp's flat regions
// (including the ties at 0 and clip) carry zero derivative.
void relu_cut_grad(const double* dh, const double* z, double* out,
                   std::size_t n, double clip);

// In-place adadelta step over one parameter tensor:
//   eg2  <- rho eg2 + (1-rho) g^2
//   d     = -sqrt(edx2+eps)/sqrt(eg2+eps) * g
//   edx2 <- rho edx2 + (1-rho) d^2
//   p    <- p + d
void adadelta_step(double* p, const double* g, double* eg2, double* edx2,
                   std::size_t n, double rho, double eps);

namespace detail {
struct KernelTable {
    void (*matvec)(const double*, const double*, const double*, double*,
                   std::size_t, std::size_t);
    void (*matvec_t)(const double*, const double*, double*, std::size_t,
                     std::size_t);
    void (*ger_acc)(double*, const double*, const double*, std::size_t,
                    std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*clipped_relu)(const double*, double*, std::size_t, double);
    void (*relu_cut_grad)(const double*, const double*, double*, std::size_t,
                          double);
    void (*adadelta_step)(double*, const double*, double*, double*,
                          std::size_t, double, double);
};
const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
} // namespace detail

} // namespace faultlab::kernels
