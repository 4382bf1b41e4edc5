#include "mfg/riccati.hpp"

#include <cmath>

#include "mfg/errors.hpp"

namespace mfg {

namespace {

constexpr double kBlowupNorm = 1e12;
constexpr double kRangeTol = 1e-8;

Mat hermite_mid(const Mat& y0, const Mat& d0, const Mat& y1, const Mat& d1, double h) {
    // Cubic Hermite at the interval midpoint; O(h^4) accurate, which matches
    // the RK4 stage error.
    return 0.5 * (y0 + y1) + 0.125 * h * (d0 - d1);
}

struct PStage {
    Mat Upsilon, Upsilon_pinv, Phi;
};

PStage p_stage(const ModelParams& m, const Mat& P) {
    PStage s;
    s.Upsilon = m.R + m.D.transpose() * P * m.D + m.D0.transpose() * P * m.D0;
    s.Upsilon_pinv = pinv(s.Upsilon);
    s.Phi = m.B.transpose() * P + m.D.transpose() * P * m.C + m.D0.transpose() * P * m.C0;
    return s;
}

Mat deriv_P(const ModelParams& m, const Mat& P) {
    const PStage s = p_stage(m, P);
    return -(P * m.A + m.A.transpose() * P + m.C.transpose() * P * m.C +
             m.C0.transpose() * P * m.C0 - s.Phi.transpose() * (s.Upsilon_pinv * s.Phi) + m.Q);
}

struct KStage {
    Mat UpsilonBar, UpsilonBar_pinv, PhiBarT, Psi;
};

KStage k_stage(const ModelParams& m, const Mat& P, const Mat& K, const PStage& ps) {
    KStage s;
    s.UpsilonBar = ps.Upsilon + m.D0.transpose() * K * m.D0;
    s.UpsilonBar_pinv = pinv(s.UpsilonBar);
    s.PhiBarT = ps.Phi.transpose() + K * m.B + m.C0.transpose() * K * m.D0;
    s.Psi = m.B.transpose() * K + m.D.transpose() * P * m.F + m.D0.transpose() * P * m.F0 +
            m.D0.transpose() * K * (m.C0 + m.F0);
    return s;
}

Mat deriv_K(const ModelParams& m, const Mat& P, const Mat& K) {
    const PStage ps = p_stage(m, P);
    const KStage ks = k_stage(m, P, K, ps);
    const Mat self_term = ps.Phi.transpose() * (ps.Upsilon_pinv * ps.Phi);
    const Mat mixed_term = ks.PhiBarT * (ks.UpsilonBar_pinv * (ps.Phi + ks.Psi));
    return -(K * (m.A + m.G) + P * m.G + m.A.transpose() * K + self_term - mixed_term +
             m.C.transpose() * P * m.F + m.C0.transpose() * P * m.F0 +
             m.C0.transpose() * K * (m.C0 + m.F0) - m.Q * m.Gamma);
}

Vec deriv_phi(const ModelParams& m, const Mat& P, const Mat& K, const Vec& phi, double t) {
    const PStage ps = p_stage(m, P);
    const KStage ks = k_stage(m, P, K, ps);
    const Mat gainT = ks.PhiBarT * ks.UpsilonBar_pinv; // n x r
    const Mat PK = P + K;
    return -((m.A.transpose() - gainT * m.B.transpose()) * phi +
             (m.C.transpose() - gainT * m.D.transpose()) * (P * m.sigma.eval(t)) +
             (m.C0.transpose() - gainT * m.D0.transpose()) * (PK * m.sigma0.eval(t)) +
             PK * m.f.eval(t) - m.Q * m.eta.eval(t));
}

void check_finite(const Mat& y, double t, const char* what) {
    if (!y.allFinite() || y.norm() > kBlowupNorm)
        throw SolverError(std::string(what) + " escaped the horizon near t = " + std::to_string(t) +
                          " (norm blow-up)");
}

bool range_ok_P(const ModelParams& m, const Mat& P, const PStage& s) {
    Mat required(m.dims.r, 3 * m.dims.n);
    required << m.B.transpose(), m.D.transpose() * P, m.D0.transpose() * P;
    return range_defect(s.Upsilon, s.Upsilon_pinv, required) <= kRangeTol;
}

bool range_ok_K(const ModelParams& m, const Mat& P, const Mat& K, const KStage& s) {
    Mat required(m.dims.r, 3 * m.dims.n);
    required << m.B.transpose(), m.D.transpose() * P, m.D0.transpose() * (P + K);
    return range_defect(s.UpsilonBar, s.UpsilonBar_pinv, required) <= kRangeTol;
}

} // namespace

CoefficientBundle bundle(const Mat& P, const Mat& K, const Vec& phi, const Vec& psi,
                         const ModelParams& m, double t) {
    const PStage ps = p_stage(m, P);
    const KStage ks = k_stage(m, P, K, ps);
    CoefficientBundle b;
    b.Upsilon = ps.Upsilon;
    b.UpsilonBar = ks.UpsilonBar;
    b.Phi = ps.Phi;
    b.PhiBarT = ks.PhiBarT;
    b.Psi = ks.Psi;
    b.Theta = m.B.transpose() * phi + m.D.transpose() * (P * m.sigma.eval(t)) +
              m.D0.transpose() * psi + m.D0.transpose() * (P * m.sigma0.eval(t)) +
              m.D0.transpose() * (K * m.sigma0.eval(t));
    const double scale = std::max(1.0, max_abs(b.Upsilon));
    if (max_abs(b.Upsilon - b.Upsilon.transpose()) > 1e-10 * scale ||
        max_abs(b.UpsilonBar - b.UpsilonBar.transpose()) > 1e-10 * std::max(1.0, max_abs(b.UpsilonBar)))
        throw SolverError("control weight lost symmetry along the solution");
    return b;
}

MatTrajectory solve_P(const ModelParams& m, const TimeGrid& grid) {
    if (!m.horizon.finite) throw SolverError("solve_P requires a finite horizon");
    const int steps = grid.steps;
    const double h = grid.h();

    MatTrajectory traj;
    traj.value.assign(grid.size(), Mat());
    traj.deriv.assign(grid.size(), Mat());
    traj.range_ok.assign(grid.size(), 1);

    traj.value[steps] = m.H; // terminal condition, stored verbatim
    for (int k = steps; k-- > 0;) {
        const Mat& P1 = traj.value[k + 1];
        const Mat k1 = deriv_P(m, P1);
        const Mat k2 = deriv_P(m, P1 - 0.5 * h * k1);
        const Mat k3 = deriv_P(m, P1 - 0.5 * h * k2);
        const Mat k4 = deriv_P(m, P1 - h * k3);
        Mat Pk = P1 - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        Pk = sym(Pk); // suppress asymmetry drift
        check_finite(Pk, grid.node(k), "P");
        traj.value[k] = Pk;
    }
    for (int k = 0; k <= steps; ++k) {
        const PStage s = p_stage(m, traj.value[k]);
        traj.deriv[k] = deriv_P(m, traj.value[k]);
        traj.range_ok[k] = range_ok_P(m, traj.value[k], s) ? 1 : 0;
        if (!traj.range_ok[k] && s.Upsilon.jacobiSvd().rank() < m.dims.r)
            throw SolverError("range condition failed at t = " + std::to_string(grid.node(k)) +
                              ": control weight is singular and does not cover the required ranges");
    }
    return traj;
}

MatTrajectory solve_K(const ModelParams& m, const TimeGrid& grid, const MatTrajectory& P) {
    const int steps = grid.steps;
    const double h = grid.h();
    if (int(P.value.size()) != grid.size()) throw SolverError("solve_K: P trajectory does not match grid");

    MatTrajectory traj;
    traj.value.assign(grid.size(), Mat());
    traj.deriv.assign(grid.size(), Mat());
    traj.range_ok.assign(grid.size(), 1);

    traj.value[steps] = -(m.H * m.Gamma0); // terminal condition
    for (int k = steps; k-- > 0;) {
        const Mat& K1 = traj.value[k + 1];
        const Mat& P1 = P.value[k + 1];
        const Mat& P0 = P.value[k];
        const Mat Pm = hermite_mid(P0, P.deriv[k], P1, P.deriv[k + 1], h);
        const Mat k1 = deriv_K(m, P1, K1);
        const Mat k2 = deriv_K(m, Pm, K1 - 0.5 * h * k1);
        const Mat k3 = deriv_K(m, Pm, K1 - 0.5 * h * k2);
        const Mat k4 = deriv_K(m, P0, K1 - h * k3);
        Mat Kk = K1 - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_finite(Kk, grid.node(k), "K");
        traj.value[k] = Kk;
    }
    for (int k = 0; k <= steps; ++k) {
        const PStage ps = p_stage(m, P.value[k]);
        const KStage ks = k_stage(m, P.value[k], traj.value[k], ps);
        traj.deriv[k] = deriv_K(m, P.value[k], traj.value[k]);
        traj.range_ok[k] = range_ok_K(m, P.value[k], traj.value[k], ks) ? 1 : 0;
        if (!traj.range_ok[k] && ks.UpsilonBar.jacobiSvd().rank() < m.dims.r)
            throw SolverError("range condition failed at t = " + std::to_string(grid.node(k)) +
                              ": aggregate control weight is singular and does not cover the required ranges");
    }
    return traj;
}

VecTrajectory solve_phi(const ModelParams& m, const TimeGrid& grid,
                        const MatTrajectory& P, const MatTrajectory& K) {
    const int steps = grid.steps;
    const double h = grid.h();

    VecTrajectory traj;
    traj.value.assign(grid.size(), Vec());
    traj.deriv.assign(grid.size(), Vec());

    traj.value[steps] = -(m.H * m.eta0); // terminal condition
    for (int k = steps; k-- > 0;) {
        const double t1 = grid.node(k + 1);
        const double t0 = grid.node(k);
        const double tm = t0 + 0.5 * h;
        const Vec& f1 = traj.value[k + 1];
        const Mat Pm = hermite_mid(P.value[k], P.deriv[k], P.value[k + 1], P.deriv[k + 1], h);
        const Mat Km = hermite_mid(K.value[k], K.deriv[k], K.value[k + 1], K.deriv[k + 1], h);
        const Vec k1 = deriv_phi(m, P.value[k + 1], K.value[k + 1], f1, t1);
        const Vec k2 = deriv_phi(m, Pm, Km, f1 - 0.5 * h * k1, tm);
        const Vec k3 = deriv_phi(m, Pm, Km, f1 - 0.5 * h * k2, tm);
        const Vec k4 = deriv_phi(m, P.value[k], K.value[k], f1 - h * k3, t0);
        Vec fk = f1 - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!fk.allFinite() || fk.norm() > kBlowupNorm)
            throw SolverError("phi escaped the horizon near t = " + std::to_string(t0));
        traj.value[k] = fk;
    }
    for (int k = 0; k <= steps; ++k)
        traj.deriv[k] = deriv_phi(m, P.value[k], K.value[k], traj.value[k], grid.node(k));
    return traj;
}

namespace {

template <typename T>
double stencil_residual(const std::vector<T>& y, const std::vector<T>& dy, double h) {
    // Five-point first-derivative stencil; truncation O(h^4), same order as
    // the integrator, so the residual decays like h^4 for smooth data.
    double worst = 0.0;
    for (size_t k = 2; k + 2 < y.size(); ++k) {
        const T approx = (-y[k + 2] + 8.0 * y[k + 1] - 8.0 * y[k - 1] + y[k - 2]) / (12.0 * h);
        worst = std::max(worst, max_abs(Mat(approx - dy[k])));
    }
    return worst;
}

} // namespace

RiccatiSolution solve_riccati(const ModelParams& m, const TimeGrid& grid) {
    RiccatiSolution sol;
    sol.grid = grid;
    MatTrajectory P = solve_P(m, grid);
    MatTrajectory K = solve_K(m, grid, P);
    VecTrajectory phi = solve_phi(m, grid, P, K);

    sol.range_ok.assign(grid.size(), 1);
    sol.diag.min_eig_upsilon = std::numeric_limits<double>::infinity();
    sol.diag.min_eig_upsilon_bar = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid.size(); ++k) {
        sol.range_ok[k] = P.range_ok[k] && K.range_ok[k];
        const CoefficientBundle b =
            bundle(P.value[k], K.value[k], phi.value[k], Vec::Zero(m.dims.n), m, grid.node(k));
        sol.diag.min_eig_upsilon = std::min(sol.diag.min_eig_upsilon, min_eig_sym(b.Upsilon));
        sol.diag.min_eig_upsilon_bar = std::min(sol.diag.min_eig_upsilon_bar, min_eig_sym(b.UpsilonBar));
        sol.diag.max_asym_P = std::max(sol.diag.max_asym_P,
                                       max_abs(P.value[k] - P.value[k].transpose()));
    }
    const double h = grid.h();
    sol.diag.max_ode_residual = std::max({stencil_residual(P.value, P.deriv, h),
                                          stencil_residual(K.value, K.deriv, h),
                                          stencil_residual(phi.value, phi.deriv, h)});
    sol.P = std::move(P.value);
    sol.Pdot = std::move(P.deriv);
    sol.K = std::move(K.value);
    sol.Kdot = std::move(K.deriv);
    sol.phi = std::move(phi.value);
    sol.phidot = std::move(phi.deriv);
    return sol;
}

FeedbackLaw FeedbackLaw::constant(const TimeGrid& grid, const Mat& self_gain,
                                  const Mat& mf_gain, const Vec& offset) {
    FeedbackLaw law;
    law.grid = grid;
    law.self_gain.assign(grid.size(), self_gain);
    law.mf_gain.assign(grid.size(), mf_gain);
    law.offset.assign(grid.size(), offset);
    return law;
}

FeedbackLaw feedback_law(const RiccatiSolution& sol, const ModelParams& m) {
    FeedbackLaw law;
    law.grid = sol.grid;
    const int nodes = sol.grid.size();
    law.self_gain.reserve(nodes);
    law.mf_gain.reserve(nodes);
    law.offset.reserve(nodes);
    const Vec psi = Vec::Zero(m.dims.n);
    for (int k = 0; k < nodes; ++k) {
        if (!sol.range_ok[k])
            throw SolverError("feedback law undefined: range condition fails at t = " +
                              std::to_string(sol.grid.node(k)));
        const CoefficientBundle b = bundle(sol.P[k], sol.K[k], sol.phi[k], psi, m, sol.grid.node(k));
        const Mat u_pinv = pinv(b.Upsilon);
        const Mat ubar_pinv = pinv(b.UpsilonBar);
        law.self_gain.push_back(-(u_pinv * b.Phi));
        law.mf_gain.push_back(-(ubar_pinv * (b.Phi + b.Psi)));
        law.offset.push_back(-(ubar_pinv * b.Theta));
    }
    return law;
}

} // namespace mfg
