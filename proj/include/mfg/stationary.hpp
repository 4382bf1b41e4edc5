#pragma once

#include <string>

#include "mfg/linalg.hpp"
#include "mfg/model.hpp"
#include "mfg/riccati.hpp"

namespace mfg {

// Mean-square stability of  dx = A x dt + C x dW + C0 x dW0  via the
// spectrum of the second-moment generator L(X) = AX + XA^T + CXC^T
// + C0XC0^T represented as an n^2 x n^2 matrix.
bool ms_stable(const Mat& A, const Mat& C, const Mat& C0);

// Largest real part of the second-moment generator spectrum (diagnostic).
double ms_growth_rate(const Mat& A, const Mat& C, const Mat& C0);

// Stabilizing solution of the symmetric algebraic Riccati equation
//   PA + A^T P + C^T P C + C0^T P C0 - Phi^T Upsilon^{-1} Phi + Q = 0.
// Strategy: integrate the differential counterpart backward from 0 to
// steady state, then polish with Newton (Kleinman) iterationson the
// algebraic residual; certify the closed loop mean-square stable.
Mat solve_stationary_P(const ModelParams& params);

struct CSplittingMatrix {
    Mat M;               // 2n x 2n
    char variant = 'a';
    double scalar = 0.0; // the extracted k (variant a) or j (variant b)
    int n_left = 0;      // eigenvalues with Re < -tol
    int n_right = 0;     // eigenvalues with Re > +tol
    int n_boundary = 0;  // |Re| <= tol: refuse to split

    bool nn_split() const { return n_boundary == 0 && n_left == n_right; }
};

// Assembles the 2n x 2n spectral test matrix for the aggregate Riccati
// equation. Variant 'a' requires C0 = kI and D0 = 0; variant 'b' requires
// C0 + F0 = jI and D0 = 0.
CSplittingMatrix build_csplitting(const ModelParams& params, const Mat& P, char variant);

// Aggregate matrix Pi = P + K from the stable invariant subspace of the
// c-splitting matrix (ordered real Schur). Verifies the algebraic residual
// and that the closed-loop aggregate drift is Hurwitz.
Mat solve_Pi(const ModelParams& params, const Mat& P, char variant);

// Constant offset phi_bar solving the stationary offset equation; requires
// constant signals and a Hurwitz closed-loop offset drift.
Vec solve_stationary_offsets(const ModelParams& params, const Mat& P, const Mat& K);

struct StationarySolution {
    Mat P;       // symmetric
    Mat K;       // K = Pi - P by construction
    Mat Pi;
    Vec phi_bar;
    double residual_P = 0.0;  // Frobenius residual of the P equation
    double residual_K = 0.0;  // ... of the K equation
    double residual_Pi = 0.0; // ... of the aggregate equation
    bool stabilizing = false;
    bool certified = false;   // false when the uncertified fallback was used
    std::string route;        // "csplit-a", "csplit-b", or "integrate"
};

// Full stationary solve: P, then Pi via the structural case that applies
// (falling back to steady-state integration of the K equation when none
// does), offsets, residuals, and stability certificates.
StationarySolution solve_stationary(const ModelParams& params);

struct StationaryFeedback {
    Mat self_gain; // r x n
    Mat mf_gain;   // r x n
    Vec offset;    // r
    bool deviation_loop_stable = false; // [A + B L_self, C + D L_self, C0 + D0 L_self]
    bool meanfield_loop_stable = false; // [A + G + B L_mf, 0, C0 + F0 + D0 L_mf]

    FeedbackLaw as_law(const TimeGrid& grid) const {
        return FeedbackLaw::constant(grid, self_gain, mf_gain, offset);
    }
};

StationaryFeedback stationary_feedback(const StationarySolution& solution, const ModelParams& params);

} // namespace mfg
