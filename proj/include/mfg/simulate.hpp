#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mfg/kernels.hpp"
#include "mfg/model.hpp"
#include "mfg/riccati.hpp"

namespace mfg {

struct SimConfig {
    int N = 50;
    int steps = 2000;
    double T = 10.0; // simulation window; matches the law grid for finite horizons
    int replications = 256;
    uint64_t seed = 1;
    bool store_paths = false;
    KernelBackend backend = KernelBackend::auto_detect;
    // Stream identity per agent slot; defaults to 0..N-1. Permuting these
    // permutes initial draws and idiosyncratic noises together, which is the
    // exchangeability test hook.
    std::vector<uint32_t> agent_streams;

    void validate() const;
    uint32_t stream_of(int agent) const {
        return agent_streams.empty() ? uint32_t(agent) : agent_streams[size_t(agent)];
    }
};

// One agent's control is replaced before the state update; everything else
// (state average, costs, the other agents) reacts through the dynamics.
struct ControlPerturbation {
    enum class Kind { none, gain_scale, offset, gain_perturb, open_loop };

    Kind kind = Kind::none;
    int agent = 0;
    double scale = 0.0;   // gain_scale: u <- (1 + scale) u
    Vec shift;            // offset: u <- u + shift
    Mat gain_delta;       // gain_perturb: u <- u + gain_delta (x_i - xbar)
    std::vector<Vec> open_loop_values; // open_loop: piecewise-constant over equal segments
};

struct PopulationPath {
    TimeGrid grid;
    int N = 0;
    uint64_t seed = 0;
    uint32_t replication = 0;
    std::vector<Mat> x;     // per node, n x N
    std::vector<Mat> u;     // per node, r x N
    std::vector<Vec> x_avg; // per node
    std::vector<Vec> x_bar; // per node, mean-field proxy
    std::vector<Vec> u_bar; // per node, mean-field control
    std::vector<double> w0; // common increments, one per step
};

// Streaming per-replication summaries (always computed, paths optional).
struct ReplicationSummary {
    uint32_t replication = 0;
    double gap_sq_integral = 0.0; // int_0^T |x_avg - x_bar|^2 dt, trapezoid
    std::vector<double> cost_state;    // per agent: tracking term integral
    std::vector<double> cost_control;  // per agent: control-energy integral
    std::vector<double> cost_terminal; // per agent: terminal term
    double tail_cost_fraction = 0.0;   // share of the running cost in the last 10%

    double cost_of(int agent) const {
        return cost_state[size_t(agent)] + cost_control[size_t(agent)] + cost_terminal[size_t(agent)];
    }
};

struct EnsembleResult {
    std::vector<ReplicationSummary> summaries;       // by replication index
    std::vector<PopulationPath> paths;               // when store_paths
};

PopulationPath simulate_population(const ModelParams& params, const FeedbackLaw& law,
                                   const SimConfig& config, uint32_t replication,
                                   const ControlPerturbation* perturbation = nullptr);

EnsembleResult simulate_ensemble(const ModelParams& params, const FeedbackLaw& law,
                                 const SimConfig& config,
                                 const ControlPerturbation* perturbation = nullptr);

// Internal single-replication engine exposed for the verification layer.
struct ReplicationRun {
    ReplicationSummary summary;
    std::optional<PopulationPath> path;
};

ReplicationRun run_replication(const ModelParams& params, const FeedbackLaw& law,
                               const SimConfig& config, uint32_t replication, bool store_path,
                               const ControlPerturbation* perturbation);

struct MeanAndError {
    double mean = 0.0;
    double stderr_ = 0.0;
};

// Finite-horizon cost of agent i along one stored path (trapezoid in time).
double cost_of_path(const PopulationPath& path, const ModelParams& params, int agent);

struct CostReport {
    std::vector<MeanAndError> per_agent; // across replications
    MeanAndError social_average;
    double state_share = 0.0;    // breakdown of the social average
    double control_share = 0.0;
    double terminal_share = 0.0;
};

CostReport evaluate_cost(const EnsembleResult& ensemble, const ModelParams& params);
MeanAndError evaluate_cost(const EnsembleResult& ensemble, const ModelParams& params, int agent);

// epsilon(N) = sqrt( E int_0^T |x_avg - x_bar|^2 dt ), expectation over
// replications, time integral by trapezoid, square root last.
MeanAndError epsilon_metric(const EnsembleResult& ensemble);

} // namespace mfg
