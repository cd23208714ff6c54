#include <atomic>
#include <cstdlib>
#include <string>

#include "faultlab/error.hpp"
#include "faultlab/kernels.hpp"

namespace faultlab::kernels {
namespace {

using detail::KernelTable;

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* table_for(Backend b) {
#if defined(__x86_64__) || defined(_M_X64)
    if (b == Backend::avx2) return &detail::avx2_table();
#endif
    (void)b;
    return &detail::scalar_table();
}

struct Dispatch {
    Backend backend;
    const KernelTable* table;
};

// Chosen once per process so a run never mixes backends; the
// FAULTLAB_KERNELS env var pins it explicitly.
Dispatch initial_dispatch() {
    Backend b = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("FAULTLAB_KERNELS")) {
        std::string v(env);
        if (v == "scalar") b = Backend::scalar;
        else if (v == "avx2" && cpu_has_avx2()) b = Backend::avx2;
    }
    return {b, table_for(b)};
}

Dispatch& dispatch() {
    static Dispatch d = initial_dispatch();
    return d;
}

} // namespace

Backend active_backend() { return dispatch().backend; }

bool backend_available(Backend b) {
    return b == Backend::scalar || cpu_has_avx2();
}

void force_backend(Backend b) {
    if (!backend_available(b))
        throw DomainError(std::string("kernel backend not available: ") +
                          backend_name(b));
    dispatch() = {b, table_for(b)};
}

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

void matvec(const double* W, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols) {
    dispatch().table->matvec(W, x, b, y, rows, cols);
}

void matvec_t(const double* W, const double* g, double* dx, std::size_t rows,
              std::size_t cols) {
    dispatch().table->matvec_t(W, g, dx, rows, cols);
}

void ger_acc(double* dW, const double* g, const double* x, std::size_t rows,
             std::size_t cols) {
    dispatch().table->ger_acc(dW, g, x, rows, cols);
}

double dot(const double* a, const double* b, std::size_t n) {
    return dispatch().table->dot(a, b, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    dispatch().table->axpy(a, x, y, n);
}

void clipped_relu(const double* x, double* y, std::size_t n, double clip) {
    dispatch().table->clipped_relu(x, y, n, clip);
}

void relu_cut_grad(const double* dh, const double* z, double* out,
                   std::size_t n, double clip) {
    dispatch().table->relu_cut_grad(dh, z, out, n, clip);
}

void adadelta_step(double* p, const double* g, double* eg2, double* edx2,
                   std::size_t n, double rho, double eps) {
    dispatch().table->adadelta_step(p, g, eg2, edx2, n, rho, eps);
}

} // namespace faultlab::kernels
