#pragma once

#include <cstdint>
#include <vector>

#include "mfg/linalg.hpp"
#include "mfg/model.hpp"

namespace mfg {

// Uniform partition of [0, T].
struct TimeGrid {
    double T = 0.0;
    int steps = 0;

    double h() const { return T / steps; }
    double node(int k) const { return (k == steps) ? T : k * h(); }
    int size() const { return steps + 1; }
    std::vector<double> nodes() const {
        std::vector<double> out(size());
        for (int k = 0; k < size(); ++k) out[k] = node(k);
        return out;
    }
};

// The recurring control-space quantities built from (P, K, phi, psi):
//
//   Upsilon    = R + D^T P D + D0^T P D0
//   UpsilonBar = Upsilon + D0^T K D0
//   Phi        = B^T P + D^T P C + D0^T P C0
//   PhiBar^T   = Phi^T + K B + C0^T K D0
//   Psi        = B^T K + D^T P F + D0^T P F0 + D0^T K (C0 + F0)
//   Theta      = B^T phi + D^T P sigma + D0^T psi + D0^T P sigma0 + D0^T K sigma0
struct CoefficientBundle {
    Mat Upsilon;    // r x r
    Mat UpsilonBar; // r x r
    Mat Phi;        // r x n
    Mat PhiBarT;    // n x r
    Mat Psi;        // r x n
    Vec Theta;      // r
};

CoefficientBundle bundle(const Mat& P, const Mat& K, const Vec& phi, const Vec& psi,
                         const ModelParams& params, double t);

struct MatTrajectory {
    std::vector<Mat> value; // per node
    std::vector<Mat> deriv; // time derivative per node (for interpolation)
    std::vector<uint8_t> range_ok;
};

struct VecTrajectory {
    std::vector<Vec> value;
    std::vector<Vec> deriv;
};

struct RiccatiDiagnostics {
    double max_ode_residual = 0.0;   // 5-point stencil vs stored derivatives
    double min_eig_upsilon = 0.0;    // over the grid
    double min_eig_upsilon_bar = 0.0;
    double max_asym_P = 0.0;         // max |P - P^T| over the grid
};

struct RiccatiSolution {
    TimeGrid grid;
    std::vector<Mat> P;
    std::vector<Mat> K;
    std::vector<Vec> phi;
    std::vector<Mat> Pdot, Kdot;
    std::vector<Vec> phidot;
    bool psi_zero = true; // deterministic offsets collapse the psi process to 0
    std::vector<uint8_t> range_ok;
    RiccatiDiagnostics diag;
};

// Backward RK4 sweeps for the three terminal-value problems. P is
// re-symmetrized every step; K is not (its equation is non-symmetric).
// Stage values of already-solved trajectories come from cubic Hermite
// interpolation between stored nodes.
MatTrajectory solve_P(const ModelParams& params, const TimeGrid& grid);
MatTrajectory solve_K(const ModelParams& params, const TimeGrid& grid, const MatTrajectory& P);
VecTrajectory solve_phi(const ModelParams& params, const TimeGrid& grid,
                        const MatTrajectory& P, const MatTrajectory& K);

RiccatiSolution solve_riccati(const ModelParams& params, const TimeGrid& grid);

// Time-indexed decentralized feedback  u_i = self_gain (x_i - xbar)
// + mf_gain xbar + offset, with the mean-field control ubar = mf_gain xbar
// + offset.
struct FeedbackLaw {
    TimeGrid grid;
    std::vector<Mat> self_gain; // r x n per node
    std::vector<Mat> mf_gain;   // r x n per node
    std::vector<Vec> offset;    // r per node

    Vec control(int node, const Vec& x, const Vec& xbar) const {
        return self_gain[node] * (x - xbar) + mf_gain[node] * xbar + offset[node];
    }
    Vec mean_control(int node, const Vec& xbar) const {
        return mf_gain[node] * xbar + offset[node];
    }

    static FeedbackLaw constant(const TimeGrid& grid, const Mat& self_gain,
                                const Mat& mf_gain, const Vec& offset);
};

FeedbackLaw feedback_law(const RiccatiSolution& solution, const ModelParams& params);

} // namespace mfg
