// AVX2+FMA kernel variants. Translation unit is compiled with
// -mavx2 -mfma; nothing here may run unless the dispatcher verified CPU
// support first.

#if defined(__x86_64__) || defined(_M_X64)

#include <cmath>
#include <cstring>
#include <immintrin.h>

#include "faultlab/kernels.hpp"

namespace faultlab::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void matvec_avx2(const double* W, const double* x, const double* b, double* y,
                 std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* w = W + r * cols;
        __m256d acc0 = _mm256_setzero_pd();
        __m256d acc1 = _mm256_setzero_pd();
        std::size_t c = 0;
        for (; c + 8 <= cols; c += 8) {
            acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(w + c),
                                   _mm256_loadu_pd(x + c), acc0);
            acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(w + c + 4),
                                   _mm256_loadu_pd(x + c + 4), acc1);
        }
        if (c + 4 <= cols) {
            acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(w + c),
                                   _mm256_loadu_pd(x + c), acc0);
            c += 4;
        }
        double sum = hsum(_mm256_add_pd(acc0, acc1));
        for (; c < cols; ++c) sum += w[c] * x[c];
        y[r] = sum + (b ? b[r] : 0.0);
    }
}

void matvec_t_avx2(const double* W, const double* g, double* dx,
                   std::size_t rows, std::size_t cols) {
    std::memset(dx, 0, cols * sizeof(double));
    for (std::size_t r = 0; r < rows; ++r) {
        const double* w = W + r * cols;
        __m256d gv = _mm256_set1_pd(g[r]);
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            __m256d d = _mm256_loadu_pd(dx + c);
            d = _mm256_fmadd_pd(gv, _mm256_loadu_pd(w + c), d);
            _mm256_storeu_pd(dx + c, d);
        }
        double gr = g[r];
        for (; c < cols; ++c) dx[c] += gr * w[c];
    }
}

void ger_acc_avx2(double* dW, const double* g, const double* x,
                  std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* w = dW + r * cols;
        __m256d gv = _mm256_set1_pd(g[r]);
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            __m256d d = _mm256_loadu_pd(w + c);
            d = _mm256_fmadd_pd(gv, _mm256_loadu_pd(x + c), d);
            _mm256_storeu_pd(w + c, d);
        }
        double gr = g[r];
        for (; c < cols; ++c) w[c] += gr * x[c];
    }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                               acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                               _mm256_loadu_pd(b + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                               acc0);
        i += 4;
    }
    double sum = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(y + i);
        v = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), v);
        _mm256_storeu_pd(y + i, v);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void clipped_relu_avx2(const double* x, double* y, std::size_t n,
                       double clip) {
    __m256d zero = _mm256_setzero_pd();
    __m256d cv = _mm256_set1_pd(clip);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        v = _mm256_min_pd(_mm256_max_pd(v, zero), cv);
        _mm256_storeu_pd(y + i, v);
    }
    for (; i < n; ++i) {
        double v = x[i];
        v = v > 0.0 ? v : 0.0;
        y[i] = v < clip ? v : clip;
    }
}

void relu_cut_grad_avx2(const double* dh, const double* z, double* out,
                        std::size_t n, double clip) {
    __m256d zero = _mm256_setzero_pd();
    __m256d cv = _mm256_set1_pd(clip);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d zv = _mm256_loadu_pd(z + i);
        __m256d m = _mm256_and_pd(_mm256_cmp_pd(zv, zero, _CMP_GT_OQ),
                                  _mm256_cmp_pd(zv, cv, _CMP_LT_OQ));
        _mm256_storeu_pd(out + i, _mm256_and_pd(m, _mm256_loadu_pd(dh + i)));
    }
    for (; i < n; ++i)
        out[i] = (z[i] > 0.0 && z[i] < clip) ? dh[i] : 0.0;
}

// No FMA here: keeps the update bitwise identical to the scalar kernel.
void adadelta_step_avx2(double* p, const double* g, double* eg2, double* edx2,
                        std::size_t n, double rho, double eps) {
    const __m256d rv = _mm256_set1_pd(rho);
    const __m256d ov = _mm256_set1_pd(1.0 - rho);
    const __m256d ev = _mm256_set1_pd(eps);
    const __m256d neg = _mm256_set1_pd(-0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d gv = _mm256_loadu_pd(g + i);
        __m256d e2 = _mm256_loadu_pd(eg2 + i);
        e2 = _mm256_add_pd(_mm256_mul_pd(rv, e2),
                           _mm256_mul_pd(ov, _mm256_mul_pd(gv, gv)));
        _mm256_storeu_pd(eg2 + i, e2);
        __m256d dx2 = _mm256_loadu_pd(edx2 + i);
        __m256d num = _mm256_sqrt_pd(_mm256_add_pd(dx2, ev));
        __m256d den = _mm256_sqrt_pd(_mm256_add_pd(e2, ev));
        __m256d d = _mm256_xor_pd(
            _mm256_mul_pd(_mm256_div_pd(num, den), gv), neg);
        dx2 = _mm256_add_pd(_mm256_mul_pd(rv, dx2),
                            _mm256_mul_pd(ov, _mm256_mul_pd(d, d)));
        _mm256_storeu_pd(edx2 + i, dx2);
        _mm256_storeu_pd(p + i, _mm256_add_pd(_mm256_loadu_pd(p + i), d));
    }
    const double om = 1.0 - rho;
    for (; i < n; ++i) {
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

const KernelTable& avx2_table() {
    static const KernelTable t = {
        matvec_avx2,     matvec_t_avx2, ger_acc_avx2,
        dot_avx2,        axpy_avx2,     clipped_relu_avx2,
        relu_cut_grad_avx2, adadelta_step_avx2,
    };
    return t;
}

} // namespace detail
} // namespace faultlab::kernels

#endif // x86_64
