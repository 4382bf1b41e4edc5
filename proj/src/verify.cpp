#include "mfg/verify.hpp"

#include <algorithm>
#include <cmath>

#include "mfg/errors.hpp"
#include "mfg/rng.hpp"

namespace mfg {

double stationarity_residual(const PopulationPath& path, const RiccatiSolution& sol,
                             const ModelParams& m) {
    if (path.grid.steps != sol.grid.steps ||
        std::abs(path.grid.T - sol.grid.T) > 1e-12 * std::max(1.0, sol.grid.T))
        throw SimulationError("mismatched grids: path and Riccati solution disagree");

    double worst = 0.0;
    const int nodes = path.grid.size();
    for (int k = 0; k < nodes; ++k) {
        const double t = path.grid.node(k);
        const Mat& P = sol.P[size_t(k)];
        const Mat& K = sol.K[size_t(k)];
        const Vec& phi = sol.phi[size_t(k)];
        const Vec& xbar = path.x_bar[size_t(k)];
        const Vec& ubar = path.u_bar[size_t(k)];
        const Vec sig = m.sigma.eval(t);
        const Vec sig0 = m.sigma0.eval(t);
        const Vec common_leg = K * ((m.C0 + m.F0) * xbar + m.D0 * ubar + sig0);
        for (int a = 0; a < path.N; ++a) {
            const Vec x = path.x[size_t(k)].col(a);
            const Vec u = path.u[size_t(k)].col(a);
            const Vec pbar = P * x + K * xbar + phi;
            const Vec q_ii = P * (m.C * x + m.D * u + m.F * xbar + sig);
            const Vec q_i0 = P * (m.C0 * x + m.D0 * u + m.F0 * xbar + sig0) + common_leg;
            const Vec res = m.B.transpose() * pbar + m.D.transpose() * q_ii +
                            m.D0.transpose() * q_i0 + m.R * u;
            worst = std::max(worst, res.cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

namespace {

// The variational population: same coefficients, zero offsets, zero initial
// states. The probed functional is then exactly the simulated cost of the
// probed agent.
ModelParams variational_model(const ModelParams& m) {
    ModelParams v = m;
    const int n = m.dims.n;
    v.f = Signal::zero(n);
    v.sigma = Signal::zero(n);
    v.sigma0 = Signal::zero(n);
    v.eta = Signal::zero(n);
    v.eta0 = Vec::Zero(n);
    v.init_law.kind = InitLaw::Kind::constant;
    v.init_law.value = Vec::Zero(n);
    v.init_mean = Vec::Zero(n);
    return v;
}

FeedbackLaw zero_law(const ModelParams& m, const SimConfig& cfg) {
    return FeedbackLaw::constant(TimeGrid{cfg.T, cfg.steps}, Mat::Zero(m.dims.r, m.dims.n),
                                 Mat::Zero(m.dims.r, m.dims.n), Vec::Zero(m.dims.r));
}

constexpr int kProbeSegments = 16;

std::vector<Vec> random_piecewise(const NoiseStream& stream, int r, int segments, double scale) {
    std::vector<Vec> values(size_t(segments), Vec::Zero(r));
    uint32_t idx = 0;
    for (int s = 0; s < segments; ++s)
        for (int k = 0; k < r; ++k) values[size_t(s)](k) = scale * stream.gaussian(idx++);
    return values;
}

} // namespace

ProbeReport convexity_probe(const ModelParams& m, const SimConfig& cfg, int probe_count) {
    if (!m.horizon.finite) throw SolverError("convexity probe requires a finite horizon");
    const ModelParams vm = variational_model(m);
    const FeedbackLaw law = zero_law(vm, cfg);

    ProbeReport report;
    report.probes = probe_count;
    for (int p = 0; p < probe_count; ++p) {
        ControlPerturbation pert;
        pert.kind = ControlPerturbation::Kind::open_loop;
        pert.agent = 0;
        const NoiseStream probe_stream(cfg.seed, uint32_t(p), 0, StreamKind::probe);
        pert.open_loop_values = random_piecewise(probe_stream, m.dims.r, kProbeSegments, 1.0);

        // Separate the probe replications in stream space from the main run.
        SimConfig probe_cfg = cfg;
        probe_cfg.store_paths = false;
        probe_cfg.seed = cfg.seed ^ (0x9E3779B97F4A7C15ull + uint64_t(p) * 0xBF58476D1CE4E5B9ull);

        const EnsembleResult ens = simulate_ensemble(vm, law, probe_cfg, &pert);
        const MeanAndError value = evaluate_cost(ens, vm, 0);
        if (report.min_index < 0 || value.mean < report.min_value) {
            report.min_value = value.mean;
            report.min_stderr = value.stderr_;
            report.min_index = p;
        }
    }
    report.violation = report.min_value < -3.0 * report.min_stderr;
    return report;
}

ControlPerturbation Deviation::to_perturbation() const {
    ControlPerturbation p;
    p.kind = kind;
    p.agent = target_agent;
    p.scale = magnitude;
    p.shift = shift;
    p.gain_delta = gain_delta;
    p.open_loop_values = open_loop_values;
    return p;
}

std::vector<Deviation> standard_deviation_suite(const ModelParams& m, uint64_t seed) {
    std::vector<Deviation> suite;
    for (double delta : {0.1, -0.1, 0.5, -0.5, 1.0, -1.0}) {
        Deviation d;
        d.kind = ControlPerturbation::Kind::gain_scale;
        d.magnitude = delta;
        d.label = "gain-scale " + std::to_string(delta);
        suite.push_back(std::move(d));
    }
    for (double v : {0.25, -0.25}) {
        Deviation d;
        d.kind = ControlPerturbation::Kind::offset;
        d.shift = Vec::Constant(m.dims.r, v);
        d.label = "offset " + std::to_string(v);
        suite.push_back(std::move(d));
    }
    for (int j = 0; j < 2; ++j) {
        Deviation d;
        d.kind = ControlPerturbation::Kind::open_loop;
        const NoiseStream stream(seed, uint32_t(j), 1, StreamKind::deviation);
        d.open_loop_values = random_piecewise(stream, m.dims.r, kProbeSegments, 0.5);
        d.label = "open-loop " + std::to_string(j);
        suite.push_back(std::move(d));
    }
    return suite;
}

namespace {

std::vector<double> per_rep_costs(const ModelParams& m, const FeedbackLaw& law,
                                  const SimConfig& cfg, int agent,
                                  const ControlPerturbation* pert) {
    std::vector<double> costs;
    costs.reserve(size_t(cfg.replications));
    for (int rep = 0; rep < cfg.replications; ++rep) {
        const ReplicationRun run = run_replication(m, law, cfg, uint32_t(rep), false, pert);
        costs.push_back(run.summary.cost_of(agent));
    }
    return costs;
}

MeanAndError paired_mean(const std::vector<double>& dev, const std::vector<double>& base) {
    MeanAndError out;
    const size_t R = dev.size();
    double sum = 0.0;
    for (size_t i = 0; i < R; ++i) sum += dev[i] - base[i];
    out.mean = sum / double(R);
    if (R > 1) {
        double ss = 0.0;
        for (size_t i = 0; i < R; ++i) {
            const double d = dev[i] - base[i] - out.mean;
            ss += d * d;
        }
        out.stderr_ = std::sqrt(ss / double(R - 1) / double(R));
    }
    return out;
}

} // namespace

MeanAndError deviation_experiment(const ModelParams& m, const FeedbackLaw& law,
                                  const SimConfig& cfg, const Deviation& deviation) {
    const ControlPerturbation pert = deviation.to_perturbation();
    const std::vector<double> base = per_rep_costs(m, law, cfg, deviation.target_agent, nullptr);
    const std::vector<double> dev = per_rep_costs(m, law, cfg, deviation.target_agent, &pert);
    return paired_mean(dev, base);
}

RateFit epsilon_rate_fit(const std::vector<std::pair<double, double>>& pairs) {
    const size_t mcount = pairs.size();
    if (mcount < 4) throw ValidationError("rate fit needs at least 4 (N, epsilon) points");
    double sx = 0.0, sy = 0.0;
    for (const auto& [N, eps] : pairs) {
        if (!(N > 0.0) || !(eps > 0.0)) throw ValidationError("rate fit needs positive N and epsilon");
        sx += std::log(N);
        sy += std::log(eps);
    }
    const double mx = sx / double(mcount), my = sy / double(mcount);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [N, eps] : pairs) {
        const double dx = std::log(N) - mx, dy = std::log(eps) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& [N, eps] : pairs) {
        const double resid = std::log(eps) - (fit.intercept + fit.slope * std::log(N));
        ss_res += resid * resid;
    }
    if (mcount > 2) {
        fit.slope_stderr = std::sqrt(ss_res / double(mcount - 2) / sxx);
        // two-sided 97.5% Student quantiles for small samples
        static const double t975[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447,
                                      2.365, 2.306, 2.262, 2.228};
        const size_t dof = mcount - 2;
        const double tq = dof <= 10 ? t975[dof - 1] : 1.96;
        fit.slope_ci_halfwidth = tq * fit.slope_stderr;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

std::vector<SweepPoint> epsilon_sweep(const ModelParams& m, const FeedbackLaw& law,
                                      const SimConfig& base, const std::vector<int>& n_list) {
    std::vector<SweepPoint> out;
    out.reserve(n_list.size());
    for (int N : n_list) {
        SimConfig cfg = base;
        cfg.N = N;
        cfg.store_paths = false;
        cfg.agent_streams.clear(); // identity streams: nested across N
        const EnsembleResult ens = simulate_ensemble(m, law, cfg);
        SweepPoint pt;
        pt.N = N;
        pt.epsilon = epsilon_metric(ens);
        pt.gap_sq.reserve(ens.summaries.size());
        for (const auto& s : ens.summaries) pt.gap_sq.push_back(s.gap_sq_integral);
        out.push_back(std::move(pt));
    }
    return out;
}

NashReport nash_certification(const ModelParams& m, const FeedbackLaw& law, const SimConfig& base,
                              const std::vector<int>& fit_Ns, int N_test) {
    NashReport report;
    report.N_test = N_test;
    const std::vector<Deviation> suite = standard_deviation_suite(m, base.seed);

    std::vector<int> all_Ns = fit_Ns;
    all_Ns.push_back(N_test);

    double fitted = 0.0;
    bool have_min = false;
    for (int N : all_Ns) {
        SimConfig cfg = base;
        cfg.N = N;
        cfg.store_paths = false;
        const std::vector<double> base_costs = per_rep_costs(m, law, cfg, 0, nullptr);
        for (const auto& dev : suite) {
            const ControlPerturbation pert = dev.to_perturbation();
            const std::vector<double> dev_costs = per_rep_costs(m, law, cfg, 0, &pert);
            const MeanAndError delta = paired_mean(dev_costs, base_costs);
            report.entries.push_back({dev.label, N, delta});
            const bool in_fit = std::find(fit_Ns.begin(), fit_Ns.end(), N) != fit_Ns.end();
            if (in_fit && delta.mean < 0.0)
                fitted = std::max(fitted, -delta.mean * std::sqrt(double(N)));
            if (N == N_test) {
                if (!have_min || delta.mean < report.min_delta_j) {
                    report.min_delta_j = delta.mean;
                    report.worst_deviation = dev.label;
                    have_min = true;
                }
                if (dev.kind == ControlPerturbation::Kind::gain_scale && dev.magnitude == 0.5)
                    report.reference_gain_scale = delta;
            }
        }
        if (N == N_test) {
            // exact-null check: a zero gain scaling must reproduce the
            // baseline paths bit for bit.
            Deviation null_dev;
            null_dev.kind = ControlPerturbation::Kind::gain_scale;
            null_dev.magnitude = 0.0;
            const ControlPerturbation pert = null_dev.to_perturbation();
            const std::vector<double> null_costs = per_rep_costs(m, law, cfg, 0, &pert);
            double worst = 0.0;
            for (size_t i = 0; i < null_costs.size(); ++i)
                worst = std::max(worst, std::abs(null_costs[i] - base_costs[i]));
            report.null_delta_j = worst;
        }
    }

    report.fitted_c = fitted;
    report.epsilon_hat = fitted / std::sqrt(double(N_test));

    // Monte Carlo reading of the sign test: a violation must be significant
    // beyond three standard errors to count.
    bool bound_ok = true;
    for (const auto& e : report.entries)
        if (e.N == N_test && e.delta_j.mean + 3.0 * e.delta_j.stderr_ < -report.epsilon_hat)
            bound_ok = false;
    const bool null_ok = report.null_delta_j == 0.0;
    const bool gain_ok =
        report.reference_gain_scale.mean > 3.0 * report.reference_gain_scale.stderr_;
    report.pass = bound_ok && null_ok && gain_ok;
    return report;
}

} // namespace mfg
