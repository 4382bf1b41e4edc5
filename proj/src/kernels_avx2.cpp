// AVX2 variants of the population kernels. Four agents per lane; per-agent
// accumulation order matches the scalar kernel exactly and no FMA is
// emitted, so trajectories agree bit-for-bit with the scalar backend.
// The tail (N mod 4 agents) falls through to the scalar kernel.

#include "mfg/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define MFG_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#else
#define MFG_HAVE_AVX2_BUILD 0
#endif

namespace mfg {

#if MFG_HAVE_AVX2_BUILD

bool avx2_supported() { return __builtin_cpu_supports("avx2") != 0; }

namespace {

// Scalar kernels with an agent offset, for the ragged tail.
void controls_tail(const KernelModel& km, const ControlInputs& in, const double* x, int begin,
                   int N, int stride, double* u) {
    const int n = km.n, r = km.r;
    for (int k = 0; k < r; ++k) {
        const double* gain_row = in.self_gain + size_t(k) * n;
        double* u_row = u + size_t(k) * stride;
        for (int a = begin; a < N; ++a) {
            double acc = in.ubar[k];
            for (int c = 0; c < n; ++c)
                acc += gain_row[c] * (x[size_t(c) * stride + a] - in.xbar[c]);
            u_row[a] = acc;
        }
    }
}

void advance_tail(const KernelModel& km, const AdvanceInputs& in, const double* x,
                  const double* u, int begin, int N, int stride, double* x_next) {
    const int n = km.n, r = km.r;
    for (int c = 0; c < n; ++c) {
        const double* a_row = km.A.data() + size_t(c) * n;
        const double* g_row = km.C.data() + size_t(c) * n;
        const double* g0_row = km.C0.data() + size_t(c) * n;
        const double* b_row = km.B.data() + size_t(c) * r;
        const double* d_row = km.D.data() + size_t(c) * r;
        const double* d0_row = km.D0.data() + size_t(c) * r;
        double* out_row = x_next + size_t(c) * stride;
        const double* self_row = x + size_t(c) * stride;
        for (int a = begin; a < N; ++a) {
            double drift = in.drift_const[c];
            double diff = in.diff_const[c];
            double diff0 = in.diff0_const[c];
            for (int j = 0; j < n; ++j) {
                const double xj = x[size_t(j) * stride + a];
                drift += a_row[j] * xj;
                diff += g_row[j] * xj;
                diff0 += g0_row[j] * xj;
            }
            for (int k = 0; k < r; ++k) {
                const double uk = u[size_t(k) * stride + a];
                drift += b_row[k] * uk;
                diff += d_row[k] * uk;
                diff0 += d0_row[k] * uk;
            }
            out_row[a] = self_row[a] + drift * in.dt + diff * in.dwi[a] + diff0 * in.dw0;
        }
    }
}

} // namespace

void controls_avx2(const KernelModel& km, const ControlInputs& in, const double* x, int N,
                   int stride, double* u) {
    const int n = km.n, r = km.r;
    const int vec_end = N - (N % 4);
    for (int k = 0; k < r; ++k) {
        const double* gain_row = in.self_gain + size_t(k) * n;
        double* u_row = u + size_t(k) * stride;
        const __m256d ubar_k = _mm256_set1_pd(in.ubar[k]);
        for (int a = 0; a < vec_end; a += 4) {
            __m256d acc = ubar_k;
            for (int c = 0; c < n; ++c) {
                const __m256d xc = _mm256_loadu_pd(x + size_t(c) * stride + a);
                const __m256d dev = _mm256_sub_pd(xc, _mm256_set1_pd(in.xbar[c]));
                acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(gain_row[c]), dev));
            }
            _mm256_storeu_pd(u_row + a, acc);
        }
    }
    if (vec_end < N) controls_tail(km, in, x, vec_end, N, stride, u);
}

void advance_avx2(const KernelModel& km, const AdvanceInputs& in, const double* x,
                  const double* u, int N, int stride, double* x_next) {
    const int n = km.n, r = km.r;
    const int vec_end = N - (N % 4);
    const __m256d dt = _mm256_set1_pd(in.dt);
    const __m256d dw0 = _mm256_set1_pd(in.dw0);
    for (int c = 0; c < n; ++c) {
        const double* a_row = km.A.data() + size_t(c) * n;
        const double* g_row = km.C.data() + size_t(c) * n;
        const double* g0_row = km.C0.data() + size_t(c) * n;
        const double* b_row = km.B.data() + size_t(c) * r;
        const double* d_row = km.D.data() + size_t(c) * r;
        const double* d0_row = km.D0.data() + size_t(c) * r;
        double* out_row = x_next + size_t(c) * stride;
        const double* self_row = x + size_t(c) * stride;
        for (int a = 0; a < vec_end; a += 4) {
            __m256d drift = _mm256_set1_pd(in.drift_const[c]);
            __m256d diff = _mm256_set1_pd(in.diff_const[c]);
            __m256d diff0 = _mm256_set1_pd(in.diff0_const[c]);
            for (int j = 0; j < n; ++j) {
                const __m256d xj = _mm256_loadu_pd(x + size_t(j) * stride + a);
                drift = _mm256_add_pd(drift, _mm256_mul_pd(_mm256_set1_pd(a_row[j]), xj));
                diff = _mm256_add_pd(diff, _mm256_mul_pd(_mm256_set1_pd(g_row[j]), xj));
                diff0 = _mm256_add_pd(diff0, _mm256_mul_pd(_mm256_set1_pd(g0_row[j]), xj));
            }
            for (int k = 0; k < r; ++k) {
                const __m256d uk = _mm256_loadu_pd(u + size_t(k) * stride + a);
                drift = _mm256_add_pd(drift, _mm256_mul_pd(_mm256_set1_pd(b_row[k]), uk));
                diff = _mm256_add_pd(diff, _mm256_mul_pd(_mm256_set1_pd(d_row[k]), uk));
                diff0 = _mm256_add_pd(diff0, _mm256_mul_pd(_mm256_set1_pd(d0_row[k]), uk));
            }
            const __m256d dwi = _mm256_loadu_pd(in.dwi + a);
            __m256d next = _mm256_loadu_pd(self_row + a);
            next = _mm256_add_pd(next, _mm256_mul_pd(drift, dt));
            next = _mm256_add_pd(next, _mm256_mul_pd(diff, dwi));
            next = _mm256_add_pd(next, _mm256_mul_pd(diff0, dw0));
            _mm256_storeu_pd(out_row + a, next);
        }
    }
    if (vec_end < N) advance_tail(km, in, x, u, vec_end, N, stride, x_next);
}

#else // !MFG_HAVE_AVX2_BUILD

bool avx2_supported() { return false; }

void controls_avx2(const KernelModel& km, const ControlInputs& in, const double* x, int N,
                   int stride, double* u) {
    controls_scalar(km, in, x, N, stride, u);
}

void advance_avx2(const KernelModel& km, const AdvanceInputs& in, const double* x,
                  const double* u, int N, int stride, double* x_next) {
    advance_scalar(km, in, x, u, N, stride, x_next);
}

#endif

} // namespace mfg
