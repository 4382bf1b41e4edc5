#pragma once

#include <string>
#include <vector>

#include "mfg/model.hpp"
#include "mfg/riccati.hpp"
#include "mfg/simulate.hpp"

namespace mfg {

// Reconstructs the adjoint representation along a simulated path and
// evaluates the stationarity identity
//   B^T pbar + D^T qbar_ii + D0^T qbar_i0 + R u_i
// at every node and agent; the feedback law is built to annihilate it, so
// the max norm is a pure floating-point cancellation measure.
double stationarity_residual(const PopulationPath& path, const RiccatiSolution& solution,
                             const ModelParams& params);

struct ProbeReport {
    double min_value = 0.0;    // smallest probe mean
    double min_stderr = 0.0;   // its standard error
    int min_index = -1;
    int probes = 0;
    bool violation = false;    // min below -3 stderr
};

// Monte Carlo probe of the convexity condition: random piecewise-constant
// controls drive the zero-initial variational population; a probe mean
// negative beyond three standard errors flags the condition as violated.
ProbeReport convexity_probe(const ModelParams& params, const SimConfig& config, int probe_count);

struct Deviation {
    ControlPerturbation::Kind kind = ControlPerturbation::Kind::gain_scale;
    int target_agent = 0;
    double magnitude = 0.0;            // gain_scale factor delta
    Vec shift;                         // constant offset
    Mat gain_delta;                    // additive self-gain perturbation
    std::vector<Vec> open_loop_values; // open-loop replacement, piecewise constant
    std::string label;

    ControlPerturbation to_perturbation() const;
};

// gain scalings (+-0.1, +-0.5, +-1), constant offsets, and two random
// open-loop replacements drawn from the deviation stream of `seed`.
std::vector<Deviation> standard_deviation_suite(const ModelParams& params, uint64_t seed);

// Paired common-random-number estimate of
//   delta_J = J_i(deviation, others on law) - J_i(everyone on law).
// Identical noise in both arms; a null deviation yields exactly zero.
MeanAndError deviation_experiment(const ModelParams& params, const FeedbackLaw& law,
                                  const SimConfig& config, const Deviation& deviation);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0; // log-intercept: fit log eps = intercept + slope log N
    double slope_stderr = 0.0;
    double slope_ci_halfwidth = 0.0; // 97.5% t-quantile * stderr
    double r_squared = 0.0;
};

// Ordinary least squares of log eps against log N; needs >= 4 points.
RateFit epsilon_rate_fit(const std::vector<std::pair<double, double>>& n_eps_pairs);

struct SweepPoint {
    int N = 0;
    MeanAndError epsilon;
    std::vector<double> gap_sq; // per replication, for smoothness diagnostics
};

// epsilon(N) over an N-list under common random numbers (same seed, nested
// agent streams).
std::vector<SweepPoint> epsilon_sweep(const ModelParams& params, const FeedbackLaw& law,
                                      const SimConfig& base_config, const std::vector<int>& n_list);

struct NashEntry {
    std::string deviation;
    int N = 0;
    MeanAndError delta_j;
};

struct NashReport {
    std::vector<NashEntry> entries;
    double fitted_c = 0.0;     // envelope constant from the fit sweep
    double epsilon_hat = 0.0;  // fitted_c / sqrt(N_test)
    int N_test = 0;
    double min_delta_j = 0.0;
    std::string worst_deviation;
    double null_delta_j = 0.0; // must be exactly zero
    MeanAndError reference_gain_scale; // delta at the +0.5 gain scaling
    bool pass = false;
};

// Certification over the deviation suite: fits the envelope constant c on
// `fit_Ns`, then tests min delta_J >= -c/sqrt(N_test) at N_test (with the
// 3-sigma Monte Carlo reading of the sign), plus the exact-null and
// positive-gain-scale checks.
NashReport nash_certification(const ModelParams& params, const FeedbackLaw& law,
                              const SimConfig& base_config, const std::vector<int>& fit_Ns,
                              int N_test);

} // namespace mfg
