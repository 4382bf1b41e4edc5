#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfg/linalg.hpp"
#include "mfg/signal.hpp"

namespace mfg {

struct Dims {
    int n = 0; // state dimension
    int r = 0; // control dimension
};

struct Horizon {
    bool finite = true;
    double T = 0.0; // end time when finite

    static Horizon finite_horizon(double T) { return Horizon{true, T}; }
    static Horizon infinite_horizon() { return Horizon{false, 0.0}; }
};

// Sampling rule for the i.i.d. initial states. Componentwise so that mixed
// specifications (e.g. uniform on one coordinate, a point mass on another)
// stay expressible.
struct InitLaw {
    enum class Kind { uniform, gaussian, constant };

    Kind kind = Kind::constant;
    Vec low, high;    // uniform
    Vec mean, stddev; // gaussian
    Vec value;        // constant

    Vec expectation() const;
    void validate(int n) const;
};

// Problem data: agent dynamics
//
//   dx_i = [A x_i + B u_i + G x^(N) + f(t)] dt
//        + [C x_i + D u_i + F x^(N) + sigma(t)]  dW_i
//        + [C0 x_i + D0 u_i + F0 x^(N) + sigma0(t)] dW0
//
// and cost
//
//   J_i = E{ int_0^T |x_i - Gamma x^(N) - eta(t)|^2_Q + |u_i|^2_R dt
//            + |x_i(T) - Gamma0 x^(N)(T) - eta0|^2_H }.
//
// All matrices are constant; the vector offsets are deterministic Signals.
struct ModelParams {
    Dims dims;
    Horizon horizon;

    Mat A, G, C, F, C0, F0; // n x n
    Mat B, D, D0;           // n x r
    Mat Q, H;               // n x n symmetric
    Mat R;                  // r x r symmetric
    Mat Gamma, Gamma0;      // n x n

    Signal f, sigma, sigma0, eta; // R^n signals
    Vec eta0;                     // terminal offset

    Vec init_mean; // E[xi_i]
    InitLaw init_law;

    std::string name;
};

struct ValidationReport {
    enum class Status { pass, fail, probe_needed };

    struct Check {
        std::string name;
        Status status = Status::pass;
        std::string detail;
    };

    std::vector<Check> checks;
    // pass when Q, R, H are all PSD (sufficient convexity certificate);
    // probe_needed when any weight is indefinite.
    Status convexity = Status::pass;

    bool ok() const {
        for (const auto& c : checks)
            if (c.status == Status::fail) return false;
        return true;
    }
};

// Checks dimension consistency, symmetry of the weights, finiteness, and the
// sufficient convexity certificate Q >= 0, R >= 0, H >= 0. Structural
// defects (wrong shapes, non-finite entries, asymmetry beyond 1e-12) throw
// ValidationError naming the offender; soft conditions land in the report.
// The only mutation is exact symmetrization of Q, R, H.
ValidationReport validate_model(ModelParams& params);

// Discounted-cost reduction: running costs weighted by e^{-rho t} are
// absorbed by A <- A - (rho/2) I together with e^{-(rho/2) t} scaling of the
// offsets f, sigma, sigma0, eta and e^{-(rho/2) T} scaling of eta0.
ModelParams discount_transform(const ModelParams& params, double rho);

// Completed-square reduction of a running cost carrying the cross term
// 2 (x_i - Gamma x^(N) - eta)^T S u_i. Records the control shift
// u = v + R^{-1} S^T (x_i - Gamma x^(N) - eta) in `control_shift` form:
// the returned model is in standard form for the shifted control.
struct CrossTermResult {
    ModelParams model;
    Mat shift_gain;   // R^{-1} S^T, r x n
    // shifted control u = v + shift_gain * (x_i - Gamma x^(N) - eta)
};

CrossTermResult cross_term_transform(const ModelParams& params, const Mat& S);

} // namespace mfg
