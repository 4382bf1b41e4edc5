#include "mfg/stationary.hpp"

#include <cmath>
#include <limits>

#include <lapacke.h>

#include "mfg/errors.hpp"

namespace mfg {

namespace {

constexpr double kAxisTol = 1e-10;    // imaginary-axis band for c-splitting
constexpr double kResidualTol = 1e-8; // acceptance residual for algebraic equations

Mat second_moment_generator(const Mat& A, const Mat& C, const Mat& C0) {
    const int n = int(A.rows());
    const Mat eye = Mat::Identity(n, n);
    return kron(eye, A) + kron(A, eye) + kron(C, C) + kron(C0, C0);
}

Mat are_residual(const ModelParams& m, const Mat& P) {
    const Mat Upsilon = m.R + m.D.transpose() * P * m.D + m.D0.transpose() * P * m.D0;
    const Mat Phi = m.B.transpose() * P + m.D.transpose() * P * m.C + m.D0.transpose() * P * m.C0;
    return P * m.A + m.A.transpose() * P + m.C.transpose() * P * m.C +
           m.C0.transpose() * P * m.C0 - Phi.transpose() * Upsilon.llt().solve(Phi) + m.Q;
}

// Solve  Ahat^T X + X Ahat + Chat^T X Chat + C0hat^T X C0hat + W = 0  by
// vectorization; returns the symmetrized solution.
Mat stochastic_lyap(const Mat& Ahat, const Mat& Chat, const Mat& C0hat, const Mat& W) {
    const int n = int(Ahat.rows());
    const Mat eye = Mat::Identity(n, n);
    const Mat M = kron(eye, Ahat.transpose()) + kron(Ahat.transpose(), eye) +
                  kron(Chat.transpose(), Chat.transpose()) +
                  kron(C0hat.transpose(), C0hat.transpose());
    Eigen::PartialPivLU<Mat> lu(M);
    Vec w(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) w(j * n + i) = W(i, j);
    const Vec x = lu.solve(-w);
    Mat X(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) X(i, j) = x(j * n + i);
    return sym(X);
}

Mat k_equation_residual(const ModelParams& m, const Mat& P, const Mat& K) {
    const CoefficientBundle b = bundle(P, K, Vec::Zero(m.dims.n), Vec::Zero(m.dims.n), m, 0.0);
    const Mat u_inv_phi = pinv(b.Upsilon) * b.Phi;
    const Mat ubar_inv = pinv(b.UpsilonBar);
    return K * (m.A + m.G) + P * m.G + m.A.transpose() * K + b.Phi.transpose() * u_inv_phi -
           b.PhiBarT * (ubar_inv * (b.Phi + b.Psi)) + m.C.transpose() * P * m.F +
           m.C0.transpose() * P * m.F0 + m.C0.transpose() * K * (m.C0 + m.F0) - m.Q * m.Gamma;
}

Mat pi_equation_residual(const ModelParams& m, const Mat& P, const Mat& Pi) {
    const Mat CF = m.C + m.F;
    const Mat C0F0 = m.C0 + m.F0;
    const Mat W = m.R + m.D.transpose() * P * m.D + m.D0.transpose() * Pi * m.D0;
    const Mat left = Pi * m.B + m.C.transpose() * P * m.D + m.C0.transpose() * Pi * m.D0;
    const Mat right = m.B.transpose() * Pi + m.D.transpose() * P * CF + m.D0.transpose() * Pi * C0F0;
    Eigen::FullPivLU<Mat> lu(W);
    if (!lu.isInvertible())
        throw SolverError("aggregate control weight R + D^T P D + D0^T Pi D0 is singular");
    return Pi * (m.A + m.G) + m.A.transpose() * Pi + m.C.transpose() * P * CF +
           m.C0.transpose() * Pi * C0F0 - left * lu.solve(right) + m.Q * (Mat::Identity(m.dims.n, m.dims.n) - m.Gamma);
}

lapack_logical select_stable_half(const double* re, const double* /*im*/) {
    return *re < 0.0 ? 1 : 0;
}

// Stable invariant subspace basis of a 2n x 2n matrix via ordered real
// Schur decomposition (stable eigenvalues led to the front).
Mat stable_subspace(const Mat& M) {
    const int n2 = int(M.rows());
    std::vector<double> a(size_t(n2) * n2);
    for (int j = 0; j < n2; ++j)
        for (int i = 0; i < n2; ++i) a[size_t(j) * n2 + i] = M(i, j);
    std::vector<double> wr(n2), wi(n2), vs(size_t(n2) * n2);
    lapack_int sdim = 0;
    const lapack_int info =
        LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', select_stable_half, n2, a.data(), n2, &sdim,
                      wr.data(), wi.data(), vs.data(), n2);
    if (info != 0)
        throw SolverError("ordered Schur decomposition failed (dgees info = " + std::to_string(info) + ")");
    if (sdim != n2 / 2)
        throw SolverError("stable subspace has dimension " + std::to_string(sdim) + ", expected " +
                          std::to_string(n2 / 2));
    Mat basis(n2, n2 / 2);
    for (int j = 0; j < n2 / 2; ++j)
        for (int i = 0; i < n2; ++i) basis(i, j) = vs[size_t(j) * n2 + i];
    return basis;
}

void count_half_planes(const Mat& M, int& left, int& right, int& boundary) {
    Eigen::EigenSolver<Mat> es(M, /*computeEigenvectors=*/false);
    left = right = boundary = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double re = es.eigenvalues()(i).real();
        if (re < -kAxisTol)
            ++left;
        else if (re > kAxisTol)
            ++right;
        else
            ++boundary;
    }
}

void require_time_invariant_weights(const ModelParams& m) {
    if (min_eig_sym(m.Q) < -1e-12) throw SolverError("stationary solve requires Q >= 0");
    if (min_eig_sym(m.R) <= 0.0) throw SolverError("stationary solve requires R > 0");
}

} // namespace

bool ms_stable(const Mat& A, const Mat& C, const Mat& C0) {
    return ms_growth_rate(A, C, C0) < -1e-12;
}

double ms_growth_rate(const Mat& A, const Mat& C, const Mat& C0) {
    if (A.rows() != A.cols() || C.rows() != C.cols() || C0.rows() != C0.cols() ||
        A.rows() != C.rows() || A.rows() != C0.rows())
        throw ValidationError("ms_stable expects square matrices of equal size");
    return max_real_eig(second_moment_generator(A, C, C0));
}

Mat solve_stationary_P(const ModelParams& m) {
    require_time_invariant_weights(m);
    const int n = m.dims.n;

    // Phase 1: backward integration of the differential equation toward the
    // steady state. R > 0 and Q >= 0 keep Upsilon(P) positive definite along
    // the sweep, so a Cholesky solve replaces the pseudo-inverse here.
    auto deriv = [&m](const Mat& P) {
        const Mat Upsilon = m.R + m.D.transpose() * P * m.D + m.D0.transpose() * P * m.D0;
        const Mat Phi = m.B.transpose() * P + m.D.transpose() * P * m.C + m.D0.transpose() * P * m.C0;
        return Mat(P * m.A + m.A.transpose() * P + m.C.transpose() * P * m.C +
                   m.C0.transpose() * P * m.C0 - Phi.transpose() * Upsilon.llt().solve(Phi) + m.Q);
    };

    Mat P = Mat::Zero(n, n);
    const double h = 0.005;
    const double max_horizon = 1e4;
    double elapsed = 0.0;
    double drift_norm = std::numeric_limits<double>::infinity();
    while (elapsed < max_horizon) {
        for (int chunk = 0; chunk < 400; ++chunk) {
            const Mat k1 = deriv(P);
            const Mat k2 = deriv(P + 0.5 * h * k1);
            const Mat k3 = deriv(P + 0.5 * h * k2);
            const Mat k4 = deriv(P + h * k3);
            P = sym(P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
            if (!P.allFinite() || P.norm() > 1e12)
                throw SolverError("stationary P integration blew up at t = " + std::to_string(elapsed));
            elapsed += h;
        }
        drift_norm = deriv(P).norm();
        if (drift_norm < 1e-10) break;
    }
    if (drift_norm >= 1e-10)
        throw SolverError("stationary P did not reach steady state within the horizon cap");

    // Phase 2: Newton (Kleinman) polish on the algebraic residual.
    for (int iter = 0; iter < 50; ++iter) {
        const double res = are_residual(m, P).norm();
        if (res <= 1e-13 * std::max(1.0, P.norm())) break;
        const Mat Upsilon = m.R + m.D.transpose() * P * m.D + m.D0.transpose() * P * m.D0;
        const Mat Phi = m.B.transpose() * P + m.D.transpose() * P * m.C + m.D0.transpose() * P * m.C0;
        const Mat gain = -Upsilon.llt().solve(Phi); // r x n
        const Mat Ahat = m.A + m.B * gain;
        const Mat Chat = m.C + m.D * gain;
        const Mat C0hat = m.C0 + m.D0 * gain;
        const Mat W = m.Q + gain.transpose() * m.R * gain;
        const Mat next = stochastic_lyap(Ahat, Chat, C0hat, W);
        if (!next.allFinite()) break;
        if ((next - P).norm() < 1e-15 * std::max(1.0, P.norm())) {
            P = next;
            break;
        }
        P = next;
    }

    const double res = are_residual(m, P).norm();
    if (res > kResidualTol)
        throw SolverError("stationary P residual " + std::to_string(res) + " exceeds tolerance");

    const Mat Upsilon = m.R + m.D.transpose() * P * m.D + m.D0.transpose() * P * m.D0;
    const Mat Phi = m.B.transpose() * P + m.D.transpose() * P * m.C + m.D0.transpose() * P * m.C0;
    const Mat gain = -Upsilon.llt().solve(Phi);
    if (!ms_stable(m.A + m.B * gain, m.C + m.D * gain, m.C0 + m.D0 * gain))
        throw SolverError("stationary P is not stabilizing: closed loop fails the mean-square test");
    return P;
}

CSplittingMatrix build_csplitting(const ModelParams& m, const Mat& P, char variant) {
    const int n = m.dims.n;
    const Mat eye = Mat::Identity(n, n);
    if (max_abs(m.D0) > 1e-12)
        throw SolverError("c-splitting construction requires D0 = 0");

    CSplittingMatrix cs;
    cs.variant = variant;
    if (variant == 'a') {
        const double k = m.C0(0, 0);
        if (max_abs(m.C0 - k * eye) > 1e-12 * std::max(1.0, std::abs(k)))
            throw SolverError("c-splitting variant a requires C0 to be a scalar multiple of I");
        cs.scalar = k;
    } else if (variant == 'b') {
        const Mat S = m.C0 + m.F0;
        const double j = S(0, 0);
        if (max_abs(S - j * eye) > 1e-12 * std::max(1.0, std::abs(j)))
            throw SolverError("c-splitting variant b requires C0 + F0 to be a scalar multiple of I");
        cs.scalar = j;
    } else {
        throw SolverError("c-splitting variant must be 'a' or 'b'");
    }

    const Mat Ut = m.R + m.D.transpose() * P * m.D; // Upsilon-tilde
    Eigen::LLT<Mat> llt(Ut);
    if (llt.info() != Eigen::Success)
        throw SolverError("R + D^T P D is not positive definite");
    const Mat CF = m.C + m.F;
    const Mat DtPCF = m.D.transpose() * P * CF;
    const Mat CtPD = m.C.transpose() * P * m.D;

    Mat M(2 * n, 2 * n);
    M.topLeftCorner(n, n) = m.A + m.G - m.B * llt.solve(DtPCF);
    if (variant == 'a') M.topLeftCorner(n, n) += cs.scalar * (m.C0 + m.F0);
    M.topRightCorner(n, n) = -m.B * llt.solve(m.B.transpose());
    M.bottomLeftCorner(n, n) =
        CtPD * llt.solve(DtPCF) - m.C.transpose() * P * CF - m.Q * (eye - m.Gamma);
    M.bottomRightCorner(n, n) = -m.A.transpose() + CtPD * llt.solve(m.B.transpose());
    if (variant == 'b') M.bottomRightCorner(n, n) -= cs.scalar * m.C0;

    cs.M = M;
    count_half_planes(M, cs.n_left, cs.n_right, cs.n_boundary);
    return cs;
}

Mat solve_Pi(const ModelParams& m, const Mat& P, char variant) {
    const int n = m.dims.n;
    const CSplittingMatrix cs = build_csplitting(m, P, variant);
    if (cs.n_boundary > 0)
        throw SolverError("c-splitting boundary case: eigenvalue within " + std::to_string(kAxisTol) +
                          " of the imaginary axis");
    if (!cs.nn_split())
        throw SolverError("matrix is not (n,n) c-splitting: " + std::to_string(cs.n_left) + " left / " +
                          std::to_string(cs.n_right) + " right eigenvalues");

    const Mat basis = stable_subspace(cs.M);
    const Mat X1 = basis.topRows(n);
    const Mat X2 = basis.bottomRows(n);
    Eigen::JacobiSVD<Mat> svd(X1);
    const double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
    if (!std::isfinite(cond) || cond > 1e12)
        throw SolverError("stable subspace is not a graph subspace (X1 condition number " +
                          std::to_string(cond) + ")");
    const Mat Pi = X2 * X1.inverse();

    const double res = pi_equation_residual(m, P, Pi).norm();
    if (res > kResidualTol)
        throw SolverError("aggregate Riccati residual " + std::to_string(res) + " exceeds tolerance");

    const Mat Ahat = cs.M.topLeftCorner(n, n) + cs.M.topRightCorner(n, n) * Pi;
    if (!is_hurwitz(Ahat))
        throw SolverError("aggregate closed-loop drift is not Hurwitz");
    return Pi;
}

Vec solve_stationary_offsets(const ModelParams& m, const Mat& P, const Mat& K) {
    for (const auto* sig : {&m.f, &m.sigma, &m.sigma0, &m.eta})
        if (!sig->is_constant())
            throw SolverError("stationary offsets require constant f, sigma, sigma0, eta");

    const CoefficientBundle b = bundle(P, K, Vec::Zero(m.dims.n), Vec::Zero(m.dims.n), m, 0.0);
    const Mat ubar_inv = pinv(b.UpsilonBar);
    const Mat gainT = b.PhiBarT * ubar_inv; // n x r
    const Mat drift = m.A.transpose() - gainT * m.B.transpose();
    if (!is_hurwitz(drift))
        throw SolverError("no stationary offset: closed-loop offset drift is not Hurwitz");

    const Mat PK = P + K;
    const Vec rhs = (m.C.transpose() - gainT * m.D.transpose()) * (P * m.sigma.eval(0.0)) +
                    (m.C0.transpose() - gainT * m.D0.transpose()) * (PK * m.sigma0.eval(0.0)) +
                    PK * m.f.eval(0.0) - m.Q * m.eta.eval(0.0);
    return drift.partialPivLu().solve(-rhs);
}

namespace {

// Fallback when neither structural case applies: run the K differential
// equation to steady state with the stationary P frozen, then polish with a
// finite-difference Newton on the K-equation residual.
Mat solve_K_by_integration(const ModelParams& m, const Mat& P, bool* converged) {
    const int n = m.dims.n;
    // Horizon-growing flow, same direction as the stationary P sweep: the
    // steady state of dK/ds = residual(K) is the algebraic solution.
    auto deriv = [&](const Mat& K) {
        return Mat(k_equation_residual(m, P, K));
    };
    Mat K = Mat::Zero(n, n);
    const double h = 0.005;
    double elapsed = 0.0;
    double drift_norm = std::numeric_limits<double>::infinity();
    while (elapsed < 1e4) {
        for (int chunk = 0; chunk < 400; ++chunk) {
            const Mat k1 = deriv(K);
            const Mat k2 = deriv(K + 0.5 * h * k1);
            const Mat k3 = deriv(K + 0.5 * h * k2);
            const Mat k4 = deriv(K + h * k3);
            K += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!K.allFinite() || K.norm() > 1e12)
                throw SolverError("stationary K integration blew up");
            elapsed += h;
        }
        drift_norm = deriv(K).norm();
        if (drift_norm < 1e-10) break;
    }

    // Finite-difference Newton on vec(K).
    for (int iter = 0; iter < 40; ++iter) {
        const Mat res = k_equation_residual(m, P, K);
        if (res.norm() <= 1e-12 * std::max(1.0, K.norm())) break;
        const double eps = 1e-7 * std::max(1.0, K.norm());
        Mat J(n * n, n * n);
        for (int c = 0; c < n * n; ++c) {
            Mat Kp = K;
            Kp(c % n, c / n) += eps;
            const Mat rp = k_equation_residual(m, P, Kp);
            for (int q = 0; q < n * n; ++q) J(q, c) = (rp(q % n, q / n) - res(q % n, q / n)) / eps;
        }
        Vec rvec(n * n);
        for (int q = 0; q < n * n; ++q) rvec(q) = res(q % n, q / n);
        const Vec delta = J.partialPivLu().solve(-rvec);
        if (!delta.allFinite()) break;
        for (int q = 0; q < n * n; ++q) K(q % n, q / n) += delta(q);
    }
    *converged = k_equation_residual(m, P, K).norm() <= kResidualTol;
    return K;
}

} // namespace

StationarySolution solve_stationary(const ModelParams& m) {
    StationarySolution out;
    out.P = solve_stationary_P(m);

    bool structural = false;
    for (char variant : {'a', 'b'}) {
        try {
            build_csplitting(m, out.P, variant);
            out.Pi = solve_Pi(m, out.P, variant);
            out.route = variant == 'a' ? "csplit-a" : "csplit-b";
            out.K = out.Pi - out.P;
            out.certified = true;
            structural = true;
            break;
        } catch (const SolverError&) {
            continue;
        }
    }
    if (!structural) {
        bool converged = false;
        out.K = solve_K_by_integration(m, out.P, &converged);
        out.Pi = out.P + out.K;
        out.route = "integrate";
        out.certified = converged;
    }

    out.residual_P = are_residual(m, out.P).norm();
    out.residual_K = k_equation_residual(m, out.P, out.K).norm();
    out.residual_Pi = pi_equation_residual(m, out.P, out.Pi).norm();

    bool offsets_ok = true;
    try {
        out.phi_bar = solve_stationary_offsets(m, out.P, out.K);
    } catch (const SolverError&) {
        out.phi_bar = Vec::Zero(m.dims.n);
        offsets_ok = m.f.is_zero() && m.sigma.is_zero() && m.sigma0.is_zero() && m.eta.is_zero();
    }

    const CoefficientBundle b = bundle(out.P, out.K, out.phi_bar, Vec::Zero(m.dims.n), m, 0.0);
    const Mat self_gain = -pinv(b.Upsilon) * b.Phi;
    const Mat mf_gain = -pinv(b.UpsilonBar) * (b.Phi + b.Psi);
    const bool dev_stable = ms_stable(m.A + m.B * self_gain, m.C + m.D * self_gain,
                                      m.C0 + m.D0 * self_gain);
    const bool mf_stable = ms_stable(m.A + m.G + m.B * mf_gain, Mat::Zero(m.dims.n, m.dims.n),
                                     m.C0 + m.F0 + m.D0 * mf_gain);
    out.stabilizing = dev_stable && mf_stable && offsets_ok &&
                      out.residual_P <= kResidualTol && out.residual_K <= kResidualTol &&
                      out.residual_Pi <= kResidualTol;
    return out;
}

StationaryFeedback stationary_feedback(const StationarySolution& sol, const ModelParams& m) {
    const CoefficientBundle b = bundle(sol.P, sol.K, sol.phi_bar, Vec::Zero(m.dims.n), m, 0.0);
    if (min_eig_sym(b.Upsilon) <= 0.0 || min_eig_sym(b.UpsilonBar) <= 0.0)
        throw SolverError("stabilizing-solution positivity failed: control weight not positive definite");
    StationaryFeedback fb;
    fb.self_gain = -(b.Upsilon.llt().solve(b.Phi));
    fb.mf_gain = -(b.UpsilonBar.llt().solve(b.Phi + b.Psi));
    fb.offset = -(b.UpsilonBar.llt().solve(b.Theta));
    fb.deviation_loop_stable = ms_stable(m.A + m.B * fb.self_gain, m.C + m.D * fb.self_gain,
                                         m.C0 + m.D0 * fb.self_gain);
    fb.meanfield_loop_stable = ms_stable(m.A + m.G + m.B * fb.mf_gain, Mat::Zero(m.dims.n, m.dims.n),
                                         m.C0 + m.F0 + m.D0 * fb.mf_gain);
    return fb;
}

} // namespace mfg
