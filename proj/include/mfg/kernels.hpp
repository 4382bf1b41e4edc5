#pragma once

#include <vector>

#include "mfg/linalg.hpp"

namespace mfg {

// Population state is stored component-major: component c of agent a lives
// at x[c * stride + a]. The kernels advance all agents of one
// Euler-Maruyama step; everything loop-carried across agents (state
// average, mean-field state) is computed by the caller.
//
// The scalar kernel is the reference semantics. The AVX2 kernel processes
// four agents per lane with the same per-agent operation order and no FMA
// contraction, so both produce bit-identical trajectories; the equivalence
// suite asserts that.

struct KernelModel {
    int n = 0;
    int r = 0;
    // row-major coefficient matrices
    std::vector<double> A, G, C, F, C0, F0; // n x n
    std::vector<double> B, D, D0;           // n x r

    static KernelModel pack(const Mat& A, const Mat& B, const Mat& G, const Mat& C, const Mat& D,
                            const Mat& F, const Mat& C0, const Mat& D0, const Mat& F0);
};

struct ControlInputs {
    const double* self_gain; // r x n row-major
    const double* xbar;      // n
    const double* ubar;      // r: mf_gain * xbar + offset, precomputed
};

struct AdvanceInputs {
    // start-of-step constants shared by all agents:
    //   drift_const = f(t) + G xavg,  diff_const = sigma(t) + F xavg,
    //   diff0_const = sigma0(t) + F0 xavg
    const double* drift_const; // n
    const double* diff_const;  // n
    const double* diff0_const; // n
    const double* dwi;         // N idiosyncratic increments
    double dw0;                // shared common increment
    double dt;
};

// u[k*stride + a] = ubar[k] + sum_c self_gain[k][c] * (x[c][a] - xbar[c])
void controls_scalar(const KernelModel& km, const ControlInputs& in, const double* x, int N,
                     int stride, double* u);
void controls_avx2(const KernelModel& km, const ControlInputs& in, const double* x, int N,
                   int stride, double* u);

// x_next = x + (A x + B u + drift_const) dt + (C x + D u + diff_const) dwi
//            + (C0 x + D0 u + diff0_const) dw0
void advance_scalar(const KernelModel& km, const AdvanceInputs& in, const double* x,
                    const double* u, int N, int stride, double* x_next);
void advance_avx2(const KernelModel& km, const AdvanceInputs& in, const double* x,
                  const double* u, int N, int stride, double* x_next);

enum class KernelBackend { auto_detect, scalar, avx2 };

bool avx2_supported();
// Resolves auto_detect against the running CPU.
KernelBackend resolve_backend(KernelBackend requested);

} // namespace mfg
