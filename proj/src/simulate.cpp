#include "mfg/simulate.hpp"

#include <cmath>

#include "mfg/errors.hpp"
#include "mfg/rng.hpp"

namespace mfg {

void SimConfig::validate() const {
    if (N < 1) throw ConfigError("sim.N must be >= 1");
    if (steps < 1) throw ConfigError("sim.steps must be >= 1");
    if (replications < 1) throw ConfigError("sim.replications must be >= 1");
    if (!(T > 0.0)) throw ConfigError("sim.T must be > 0");
    if (!agent_streams.empty() && int(agent_streams.size()) != N)
        throw ConfigError("sim.agent_streams must have one entry per agent");
}

namespace {

constexpr double kStateCap = 1e9;

// Everything that is identical across replications, precomputed once.
struct SimPlan {
    KernelModel km;
    int steps = 0;
    double h = 0.0;
    std::vector<std::vector<double>> self_gain; // per node, r*n row-major
    std::vector<Mat> mf_gain;                   // per node
    std::vector<Vec> offset;
    std::vector<Vec> f_node, sigma_node, sigma0_node, eta_node; // signals at nodes
    std::vector<double> trap_w;                 // trapezoid weights
    std::vector<double> Q_flat, R_flat, Gamma_flat, H_flat, Gamma0_flat; // row-major
    Vec eta0;
    KernelBackend backend = KernelBackend::scalar;
};

std::vector<double> flat_rm(const Mat& m) {
    std::vector<double> out(size_t(m.rows()) * m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[size_t(i) * m.cols() + j] = m(i, j);
    return out;
}

SimPlan make_plan(const ModelParams& m, const FeedbackLaw& law, const SimConfig& cfg) {
    if (law.grid.steps != cfg.steps || std::abs(law.grid.T - cfg.T) > 1e-12 * std::max(1.0, cfg.T))
        throw SimulationError("mismatched grids: feedback law and simulation window disagree");
    SimPlan plan;
    plan.km = KernelModel::pack(m.A, m.B, m.G, m.C, m.D, m.F, m.C0, m.D0, m.F0);
    plan.steps = cfg.steps;
    plan.h = law.grid.h();
    plan.backend = resolve_backend(cfg.backend);
    const int nodes = cfg.steps + 1;
    plan.self_gain.reserve(nodes);
    for (int k = 0; k < nodes; ++k) plan.self_gain.push_back(flat_rm(law.self_gain[k]));
    plan.mf_gain = law.mf_gain;
    plan.offset = law.offset;
    plan.f_node.resize(nodes);
    plan.sigma_node.resize(nodes);
    plan.sigma0_node.resize(nodes);
    plan.eta_node.resize(nodes);
    for (int k = 0; k < nodes; ++k) {
        const double t = law.grid.node(k);
        plan.f_node[k] = m.f.eval(t);
        plan.sigma_node[k] = m.sigma.eval(t);
        plan.sigma0_node[k] = m.sigma0.eval(t);
        plan.eta_node[k] = m.eta.eval(t);
    }
    plan.trap_w.assign(nodes, plan.h);
    plan.trap_w.front() = plan.trap_w.back() = 0.5 * plan.h;
    plan.Q_flat = flat_rm(m.Q);
    plan.R_flat = flat_rm(m.R);
    plan.Gamma_flat = flat_rm(m.Gamma);
    plan.H_flat = flat_rm(m.H);
    plan.Gamma0_flat = flat_rm(m.Gamma0);
    plan.eta0 = m.eta0;
    return plan;
}

void column_means(const double* x, int n, int N, int stride, double* out) {
    for (int c = 0; c < n; ++c) {
        double acc = 0.0;
        const double* row = x + size_t(c) * stride;
        for (int a = 0; a < N; ++a) acc += row[a];
        out[c] = acc / double(N);
    }
}

Vec draw_initial(const InitLaw& law, const NoiseStream& stream, int n) {
    Vec x(n);
    switch (law.kind) {
        case InitLaw::Kind::uniform:
            for (int c = 0; c < n; ++c)
                x(c) = law.low(c) + (law.high(c) - law.low(c)) * stream.uniform(uint32_t(c));
            break;
        case InitLaw::Kind::gaussian:
            for (int c = 0; c < n; ++c) x(c) = law.mean(c) + law.stddev(c) * stream.gaussian(uint32_t(c));
            break;
        case InitLaw::Kind::constant:
            x = law.value;
            break;
    }
    return x;
}

void apply_perturbation(const ControlPerturbation& p, const SimPlan& plan, int node,
                        const double* x, const Vec& xbar, int N, int stride, double* u) {
    if (p.kind == ControlPerturbation::Kind::none) return;
    const int r = plan.km.r, n = plan.km.n;
    const int a = p.agent;
    if (a < 0 || a >= N) throw SimulationError("perturbation targets an agent outside the population");
    switch (p.kind) {
        case ControlPerturbation::Kind::none:
            break;
        case ControlPerturbation::Kind::gain_scale: {
            const double factor = 1.0 + p.scale;
            for (int k = 0; k < r; ++k) u[size_t(k) * stride + a] *= factor;
            break;
        }
        case ControlPerturbation::Kind::offset:
            for (int k = 0; k < r; ++k) u[size_t(k) * stride + a] += p.shift(k);
            break;
        case ControlPerturbation::Kind::gain_perturb:
            for (int k = 0; k < r; ++k) {
                double acc = 0.0;
                for (int c = 0; c < n; ++c)
                    acc += p.gain_delta(k, c) * (x[size_t(c) * stride + a] - xbar(c));
                u[size_t(k) * stride + a] += acc;
            }
            break;
        case ControlPerturbation::Kind::open_loop: {
            const int segments = int(p.open_loop_values.size());
            const int seg = std::min(segments - 1, int((int64_t(node) * segments) / plan.steps));
            for (int k = 0; k < r; ++k) u[size_t(k) * stride + a] = p.open_loop_values[size_t(seg)](k);
            break;
        }
    }
}

ReplicationRun run_with_plan(const ModelParams& m, const SimPlan& plan, const SimConfig& cfg,
                             uint32_t replication, bool store_path,
                             const ControlPerturbation* perturbation) {
    const int n = plan.km.n, r = plan.km.r, N = cfg.N, stride = cfg.N;
    const double h = plan.h;
    const double sqrt_h = std::sqrt(h);
    const bool use_avx2 = plan.backend == KernelBackend::avx2;

    std::vector<NoiseStream> idio;
    idio.reserve(size_t(N));
    for (int a = 0; a < N; ++a)
        idio.emplace_back(cfg.seed, replication, cfg.stream_of(a), StreamKind::idiosyncratic);
    const NoiseStream common(cfg.seed, replication, 0, StreamKind::common);

    std::vector<double> x_cur(size_t(n) * size_t(stride)), x_next(size_t(n) * size_t(stride));
    std::vector<double> u(size_t(r) * size_t(stride)), dwi(static_cast<size_t>(N));
    for (int a = 0; a < N; ++a) {
        const NoiseStream init_stream(cfg.seed, replication, cfg.stream_of(a), StreamKind::init);
        const Vec x0 = draw_initial(m.init_law, init_stream, n);
        for (int c = 0; c < n; ++c) x_cur[size_t(c) * stride + a] = x0(c);
    }
    Vec xbar = m.init_mean;

    ReplicationRun run;
    run.summary.replication = replication;
    run.summary.cost_state.assign(size_t(N), 0.0);
    run.summary.cost_control.assign(size_t(N), 0.0);
    run.summary.cost_terminal.assign(size_t(N), 0.0);
    double social_running = 0.0, social_tail = 0.0;
    const double tail_start = 0.9 * cfg.T;

    if (store_path) {
        run.path.emplace();
        run.path->grid = TimeGrid{cfg.T, cfg.steps};
        run.path->N = N;
        run.path->seed = cfg.seed;
        run.path->replication = replication;
        run.path->x.reserve(size_t(plan.steps) + 1);
        run.path->u.reserve(size_t(plan.steps) + 1);
    }

    std::vector<double> xavg(static_cast<size_t>(n)), ubar_arr(static_cast<size_t>(r));
    std::vector<double> drift_const(static_cast<size_t>(n)), diff_const(static_cast<size_t>(n)),
        diff0_const(static_cast<size_t>(n));
    std::vector<double> gxavg(static_cast<size_t>(n)); // Gamma * xavg + eta(t)

    for (int k = 0;; ++k) {
        column_means(x_cur.data(), n, N, stride, xavg.data());

        // controls at node k
        const Vec ubar = plan.mf_gain[size_t(k)] * xbar + plan.offset[size_t(k)];
        for (int q = 0; q < r; ++q) ubar_arr[size_t(q)] = ubar(q);
        ControlInputs cin{plan.self_gain[size_t(k)].data(), xbar.data(), ubar_arr.data()};
        if (use_avx2)
            controls_avx2(plan.km, cin, x_cur.data(), N, stride, u.data());
        else
            controls_scalar(plan.km, cin, x_cur.data(), N, stride, u.data());
        if (perturbation)
            apply_perturbation(*perturbation, plan, k, x_cur.data(), xbar, N, stride, u.data());

        // cost and gap accumulation at node k (trapezoid weight)
        const double w = plan.trap_w[size_t(k)];
        {
            const Vec& eta_k = plan.eta_node[size_t(k)];
            for (int c = 0; c < n; ++c) {
                double acc = eta_k(c);
                for (int j = 0; j < n; ++j)
                    acc += plan.Gamma_flat[size_t(c) * n + j] * xavg[size_t(j)];
                gxavg[size_t(c)] = acc;
            }
            double gap_sq = 0.0;
            for (int c = 0; c < n; ++c) {
                const double d = xavg[size_t(c)] - xbar(c);
                gap_sq += d * d;
            }
            run.summary.gap_sq_integral += w * gap_sq;

            double node_social = 0.0;
            for (int a = 0; a < N; ++a) {
                double quad = 0.0;
                for (int c = 0; c < n; ++c) {
                    const double dc = x_cur[size_t(c) * stride + a] - gxavg[size_t(c)];
                    for (int j = 0; j < n; ++j) {
                        const double dj = x_cur[size_t(j) * stride + a] - gxavg[size_t(j)];
                        quad += dc * plan.Q_flat[size_t(c) * n + j] * dj;
                    }
                }
                double ctrl = 0.0;
                for (int p = 0; p < r; ++p) {
                    const double up = u[size_t(p) * stride + a];
                    for (int q = 0; q < r; ++q)
                        ctrl += up * plan.R_flat[size_t(p) * r + q] * u[size_t(q) * stride + a];
                }
                run.summary.cost_state[size_t(a)] += w * quad;
                run.summary.cost_control[size_t(a)] += w * ctrl;
                node_social += w * (quad + ctrl);
            }
            node_social /= double(N);
            social_running += node_social;
            if (plan.h * k >= tail_start) social_tail += node_social;
        }

        if (store_path) {
            Mat xs(n, N), us(r, N);
            for (int c = 0; c < n; ++c)
                for (int a = 0; a < N; ++a) xs(c, a) = x_cur[size_t(c) * stride + a];
            for (int q = 0; q < r; ++q)
                for (int a = 0; a < N; ++a) us(q, a) = u[size_t(q) * stride + a];
            run.path->x.push_back(std::move(xs));
            run.path->u.push_back(std::move(us));
            Vec xavg_v(n);
            for (int c = 0; c < n; ++c) xavg_v(c) = xavg[size_t(c)];
            run.path->x_avg.push_back(xavg_v);
            run.path->x_bar.push_back(xbar);
            run.path->u_bar.push_back(ubar);
        }

        if (k == plan.steps) break;

        // noise for step k
        for (int a = 0; a < N; ++a) dwi[size_t(a)] = sqrt_h * idio[size_t(a)].gaussian(uint32_t(k));
        const double dw0 = sqrt_h * common.gaussian(uint32_t(k));
        if (store_path) run.path->w0.push_back(dw0);

        // start-of-step constants shared by all agents
        const Vec& f_k = plan.f_node[size_t(k)];
        const Vec& s_k = plan.sigma_node[size_t(k)];
        const Vec& s0_k = plan.sigma0_node[size_t(k)];
        for (int c = 0; c < n; ++c) {
            double dc = f_k(c), vc = s_k(c), v0 = s0_k(c);
            for (int j = 0; j < n; ++j) {
                dc += plan.km.G[size_t(c) * n + j] * xavg[size_t(j)];
                vc += plan.km.F[size_t(c) * n + j] * xavg[size_t(j)];
                v0 += plan.km.F0[size_t(c) * n + j] * xavg[size_t(j)];
            }
            drift_const[size_t(c)] = dc;
            diff_const[size_t(c)] = vc;
            diff0_const[size_t(c)] = v0;
        }
        AdvanceInputs ain{drift_const.data(), diff_const.data(), diff0_const.data(),
                          dwi.data(), dw0, h};
        if (use_avx2)
            advance_avx2(plan.km, ain, x_cur.data(), u.data(), N, stride, x_next.data());
        else
            advance_scalar(plan.km, ain, x_cur.data(), u.data(), N, stride, x_next.data());
        std::swap(x_cur, x_next);

        // mean-field proxy driven by the same common increment
        xbar = xbar + (((m.A + m.G) * xbar + m.B * ubar + f_k) * h) +
               (((m.C0 + m.F0) * xbar + m.D0 * ubar + s0_k) * dw0);

        double worst = 0.0;
        for (double v : x_cur) worst = std::max(worst, std::abs(v));
        if (!(worst <= kStateCap) || !xbar.allFinite() || xbar.cwiseAbs().maxCoeff() > kStateCap)
            throw SimulationError("population state blew up at step " + std::to_string(k + 1));
    }

    // terminal costs
    {
        const int k = plan.steps;
        column_means(x_cur.data(), n, N, stride, xavg.data());
        for (int c = 0; c < n; ++c) {
            double acc = plan.eta0(c);
            for (int j = 0; j < n; ++j)
                acc += plan.Gamma0_flat[size_t(c) * n + j] * xavg[size_t(j)];
            gxavg[size_t(c)] = acc;
        }
        (void)k;
        for (int a = 0; a < N; ++a) {
            double quad = 0.0;
            for (int c = 0; c < n; ++c) {
                const double dc = x_cur[size_t(c) * stride + a] - gxavg[size_t(c)];
                for (int j = 0; j < n; ++j) {
                    const double dj = x_cur[size_t(j) * stride + a] - gxavg[size_t(j)];
                    quad += dc * plan.H_flat[size_t(c) * n + j] * dj;
                }
            }
            run.summary.cost_terminal[size_t(a)] = quad;
        }
    }
    run.summary.tail_cost_fraction = social_running > 0.0 ? social_tail / social_running : 0.0;
    return run;
}

} // namespace

ReplicationRun run_replication(const ModelParams& m, const FeedbackLaw& law, const SimConfig& cfg,
                               uint32_t replication, bool store_path,
                               const ControlPerturbation* perturbation) {
    cfg.validate();
    const SimPlan plan = make_plan(m, law, cfg);
    return run_with_plan(m, plan, cfg, replication, store_path, perturbation);
}

PopulationPath simulate_population(const ModelParams& m, const FeedbackLaw& law,
                                   const SimConfig& cfg, uint32_t replication,
                                   const ControlPerturbation* perturbation) {
    ReplicationRun run = run_replication(m, law, cfg, replication, /*store_path=*/true, perturbation);
    return std::move(*run.path);
}

EnsembleResult simulate_ensemble(const ModelParams& m, const FeedbackLaw& law, const SimConfig& cfg,
                                 const ControlPerturbation* perturbation) {
    cfg.validate();
    const SimPlan plan = make_plan(m, law, cfg);
    EnsembleResult out;
    out.summaries.reserve(size_t(cfg.replications));
    for (int rep = 0; rep < cfg.replications; ++rep) {
        ReplicationRun run =
            run_with_plan(m, plan, cfg, uint32_t(rep), cfg.store_paths, perturbation);
        out.summaries.push_back(std::move(run.summary));
        if (cfg.store_paths) out.paths.push_back(std::move(*run.path));
    }
    return out;
}

double cost_of_path(const PopulationPath& path, const ModelParams& m, int agent) {
    if (agent < 0 || agent >= path.N) throw SimulationError("cost_of_path: agent index out of range");
    const int nodes = path.grid.size();
    const double h = path.grid.h();
    double integral = 0.0;
    for (int k = 0; k < nodes; ++k) {
        const double w = (k == 0 || k == nodes - 1) ? 0.5 * h : h;
        const Vec dev = path.x[size_t(k)].col(agent) - m.Gamma * path.x_avg[size_t(k)] -
                        m.eta.eval(path.grid.node(k));
        const Vec uc = path.u[size_t(k)].col(agent);
        integral += w * (dev.dot(m.Q * dev) + uc.dot(m.R * uc));
    }
    const Vec devT = path.x.back().col(agent) - m.Gamma0 * path.x_avg.back() - m.eta0;
    return integral + devT.dot(m.H * devT);
}

namespace {

MeanAndError mean_and_error(const std::vector<double>& values) {
    MeanAndError out;
    const size_t R = values.size();
    if (R == 0) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / double(R);
    if (R > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.stderr_ = std::sqrt(ss / double(R - 1) / double(R));
    }
    return out;
}

} // namespace

MeanAndError evaluate_cost(const EnsembleResult& ensemble, const ModelParams&, int agent) {
    std::vector<double> values;
    values.reserve(ensemble.summaries.size());
    for (const auto& s : ensemble.summaries) {
        if (agent < 0 || agent >= int(s.cost_state.size()))
            throw SimulationError("evaluate_cost: agent index out of range");
        values.push_back(s.cost_of(agent));
    }
    return mean_and_error(values);
}

CostReport evaluate_cost(const EnsembleResult& ensemble, const ModelParams& m) {
    CostReport report;
    if (ensemble.summaries.empty()) return report;
    const int N = int(ensemble.summaries.front().cost_state.size());
    report.per_agent.resize(size_t(N));
    for (int a = 0; a < N; ++a) report.per_agent[size_t(a)] = evaluate_cost(ensemble, m, a);

    std::vector<double> social;
    double state_acc = 0.0, control_acc = 0.0, terminal_acc = 0.0;
    for (const auto& s : ensemble.summaries) {
        double total = 0.0;
        for (int a = 0; a < N; ++a) {
            total += s.cost_of(a);
            state_acc += s.cost_state[size_t(a)];
            control_acc += s.cost_control[size_t(a)];
            terminal_acc += s.cost_terminal[size_t(a)];
        }
        social.push_back(total / double(N));
    }
    report.social_average = mean_and_error(social);
    const double denom = double(ensemble.summaries.size()) * double(N);
    report.state_share = state_acc / denom;
    report.control_share = control_acc / denom;
    report.terminal_share = terminal_acc / denom;
    return report;
}

MeanAndError epsilon_metric(const EnsembleResult& ensemble) {
    std::vector<double> gaps;
    gaps.reserve(ensemble.summaries.size());
    for (const auto& s : ensemble.summaries) gaps.push_back(s.gap_sq_integral);
    const MeanAndError mean_sq = mean_and_error(gaps);
    MeanAndError out;
    out.mean = std::sqrt(std::max(0.0, mean_sq.mean));
    out.stderr_ = out.mean > 0.0 ? mean_sq.stderr_ / (2.0 * out.mean) : 0.0;
    return out;
}

} // namespace mfg
