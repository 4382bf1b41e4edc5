#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

#include "doctest.h"
#include "mfg/errors.hpp"
#include "mfg/model_io.hpp"
#include "mfg/riccati.hpp"
#include "mfg/simulate.hpp"
#include "mfg/verify.hpp"

using namespace mfg;

TEST_SUITE_BEGIN("verify");

namespace {

FeedbackLaw solve_law_for(const ModelParams& m, int steps, RiccatiSolution* sol_out = nullptr) {
    const TimeGrid grid{m.horizon.T, steps};
    RiccatiSolution sol = solve_riccati(m, grid);
    FeedbackLaw law = feedback_law(sol, m);
    if (sol_out) *sol_out = std::move(sol);
    return law;
}

} // namespace

TEST_CASE("stationarity identity holds along simulated paths") {
    const ModelParams m = make_paper_sec4();
    RiccatiSolution sol;
    const FeedbackLaw law = solve_law_for(m, 300, &sol);
    SimConfig cfg;
    cfg.N = 8;
    cfg.steps = 300;
    cfg.T = 10.0;
    cfg.replications = 2;
    cfg.seed = 42;
    cfg.store_paths = true;
    const EnsembleResult ens = simulate_ensemble(m, law, cfg);
    double worst = 0.0;
    for (const auto& path : ens.paths)
        worst = std::max(worst, stationarity_residual(path, sol, m));
    CHECK(worst <= 1e-9);
}

TEST_CASE("a corrupted law trips the stationarity detector") {
    const ModelParams m = make_paper_sec4();
    RiccatiSolution sol;
    FeedbackLaw law = solve_law_for(m, 200, &sol);
    for (auto& g : law.self_gain) g *= 1.01;
    SimConfig cfg;
    cfg.N = 4;
    cfg.steps = 200;
    cfg.T = 10.0;
    cfg.replications = 1;
    cfg.seed = 8;
    const PopulationPath path = simulate_population(m, law, cfg, 0);
    CHECK(stationarity_residual(path, sol, m) > 1e-3);
}

TEST_CASE("grid mismatch is rejected") {
    const ModelParams m = make_paper_sec4();
    RiccatiSolution sol;
    const FeedbackLaw law = solve_law_for(m, 200, &sol);
    const RiccatiSolution other = solve_riccati(m, TimeGrid{10.0, 100});
    SimConfig cfg;
    cfg.N = 2;
    cfg.steps = 200;
    cfg.T = 10.0;
    cfg.replications = 1;
    cfg.seed = 8;
    const PopulationPath path = simulate_population(m, law, cfg, 0);
    CHECK_THROWS_AS(stationarity_residual(path, other, m), SimulationError);
}

namespace {

// Exact-arithmetic re-computation of the stationarity identity at one node.
// Doubles are rationals, so lifting every operand to cpp_rational and
// redoing the algebra shows the residual is identically zero as soon as the
// gains are the exact pseudo-inverse expressions (r = 1 makes the inverse a
// rational division).
using Rat = boost::multiprecision::cpp_rational;
using RatVec = std::vector<Rat>;
using RatMat = std::vector<std::vector<Rat>>;

RatMat lift(const Mat& m) {
    RatMat out(size_t(m.rows()), std::vector<Rat>(size_t(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[size_t(i)][size_t(j)] = Rat(m(i, j));
    return out;
}

RatVec lift(const Vec& v) {
    RatVec out(size_t(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[size_t(i)] = Rat(v(i));
    return out;
}

RatVec matvec(const RatMat& m, const RatVec& v) {
    RatVec out(m.size(), Rat(0));
    for (size_t i = 0; i < m.size(); ++i)
        for (size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
    return out;
}

RatVec add(const RatVec& a, const RatVec& b) {
    RatVec out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

RatVec sub(const RatVec& a, const RatVec& b) {
    RatVec out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

RatVec scale(const RatVec& a, const Rat& s) {
    RatVec out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

Rat dot(const RatVec& a, const RatVec& b) {
    Rat out(0);
    for (size_t i = 0; i < a.size(); ++i) out += a[i] * b[i];
    return out;
}

RatMat transpose(const RatMat& m) {
    RatMat out(m[0].size(), std::vector<Rat>(m.size()));
    for (size_t i = 0; i < m.size(); ++i)
        for (size_t j = 0; j < m[0].size(); ++j) out[j][i] = m[i][j];
    return out;
}

RatMat mat_add(const RatMat& a, const RatMat& b) {
    RatMat out = a;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < a[0].size(); ++j) out[i][j] += b[i][j];
    return out;
}

} // namespace

TEST_CASE("exact-arithmetic cancellation of the stationarity identity at a node") {
    const ModelParams m = make_paper_sec4();
    RiccatiSolution sol;
    const FeedbackLaw law = solve_law_for(m, 200, &sol);
    (void)law;

    const int k = 100; // any node
    const double t = sol.grid.node(k);
    const RatMat P = lift(sol.P[size_t(k)]);
    const RatMat K = lift(sol.K[size_t(k)]);
    const RatVec phi = lift(sol.phi[size_t(k)]);
    const RatMat B = lift(m.B), D = lift(m.D), D0 = lift(m.D0);
    const RatMat C = lift(m.C), C0 = lift(m.C0), F = lift(m.F), F0 = lift(m.F0);
    const RatVec sig = lift(m.sigma.eval(t)), sig0 = lift(m.sigma0.eval(t));
    const Rat R = Rat(m.R(0, 0));

    // arbitrary state values (doubles, hence rationals)
    const RatVec xi = lift((Vec(2) << 1.37, -0.61).finished());
    const RatVec xbar = lift((Vec(2) << 0.44, 0.29).finished());

    const RatMat Bt = transpose(B), Dt = transpose(D), D0t = transpose(D0);
    // r = 1: treat the control-space quantities as scalars / row vectors
    auto row_of = [](const RatMat& mat) { return mat[0]; };
    const RatVec PD = matvec(P, {D[0][0], D[1][0]});
    const RatVec PD0 = matvec(P, {D0[0][0], D0[1][0]});
    const RatVec KD0 = matvec(K, {D0[0][0], D0[1][0]});
    const Rat Ups = R + dot(row_of(Dt), PD) + dot(row_of(D0t), PD0);
    const Rat UpsBar = Ups + dot(row_of(D0t), KD0);

    // Phi = B^T P + D^T P C + D0^T P C0  (1 x 2)
    RatVec Phi(2), Psi(2);
    const RatMat PC = {matvec(P, {C[0][0], C[1][0]}), matvec(P, {C[0][1], C[1][1]})};
    const RatMat PC0 = {matvec(P, {C0[0][0], C0[1][0]}), matvec(P, {C0[0][1], C0[1][1]})};
    const RatMat PF = {matvec(P, {F[0][0], F[1][0]}), matvec(P, {F[0][1], F[1][1]})};
    const RatMat PF0 = {matvec(P, {F0[0][0], F0[1][0]}), matvec(P, {F0[0][1], F0[1][1]})};
    const RatMat KC0F0 = {matvec(K, {C0[0][0] + F0[0][0], C0[1][0] + F0[1][0]}),
                          matvec(K, {C0[0][1] + F0[0][1], C0[1][1] + F0[1][1]})};
    for (size_t j = 0; j < 2; ++j) {
        Phi[j] = dot(row_of(Bt), {P[0][j], P[1][j]}) + dot(row_of(Dt), PC[j]) +
                 dot(row_of(D0t), PC0[j]);
        Psi[j] = dot(row_of(Bt), {K[0][j], K[1][j]}) + dot(row_of(Dt), PF[j]) +
                 dot(row_of(D0t), PF0[j]) + dot(row_of(D0t), KC0F0[j]);
    }
    const Rat Theta = dot(row_of(Bt), phi) + dot(row_of(Dt), matvec(P, sig)) +
                      dot(row_of(D0t), matvec(P, sig0)) + dot(row_of(D0t), matvec(K, sig0));

    // exact gains and controls
    const Rat mf_part = (dot(add(Phi, Psi), xbar) + Theta) / UpsBar;
    const Rat u_i = -dot(Phi, sub(xi, xbar)) / Ups - mf_part;
    const Rat u_bar = -mf_part;

    // full reconstruction of the identity
    const RatVec Dcol{D[0][0], D[1][0]};
    const RatVec D0col{D0[0][0], D0[1][0]};
    const RatVec pbar = add(add(matvec(P, xi), matvec(K, xbar)), phi);
    const RatVec q_ii =
        matvec(P, add(add(matvec(C, xi), scale(Dcol, u_i)), add(matvec(F, xbar), sig)));
    const RatVec q_i0 =
        add(matvec(P, add(add(matvec(C0, xi), scale(D0col, u_i)), add(matvec(F0, xbar), sig0))),
            matvec(K, add(add(matvec(mat_add(C0, F0), xbar), scale(D0col, u_bar)), sig0)));
    const Rat residual = dot(row_of(Bt), pbar) + dot(row_of(Dt), q_ii) + dot(row_of(D0t), q_i0) +
                         R * u_i;
    CHECK(residual == Rat(0));
}

TEST_CASE("convexity probe passes on PSD weights") {
    const ModelParams m = make_paper_sec4();
    SimConfig cfg;
    cfg.N = 6;
    cfg.steps = 200;
    cfg.T = 10.0;
    cfg.replications = 24;
    cfg.seed = 55;
    const ProbeReport report = convexity_probe(m, cfg, 4);
    CHECK_FALSE(report.violation);
    CHECK(report.min_value >= -3.0 * report.min_stderr);
}

TEST_CASE("negative control weight is flagged") {
    ModelParams m = make_paper_sec4();
    m.Q.setZero();
    m.H.setZero();
    m.R = Mat::Constant(1, 1, -1.0);
    SimConfig cfg;
    cfg.N = 4;
    cfg.steps = 150;
    cfg.T = 10.0;
    cfg.replications = 16;
    cfg.seed = 56;
    const ProbeReport report = convexity_probe(m, cfg, 3);
    CHECK(report.violation);
    CHECK(report.min_value < 0.0);
}

TEST_CASE("null deviation changes nothing, bit for bit") {
    const ModelParams m = make_paper_sec4();
    const FeedbackLaw law = solve_law_for(m, 150);
    SimConfig cfg;
    cfg.N = 8;
    cfg.steps = 150;
    cfg.T = 10.0;
    cfg.replications = 12;
    cfg.seed = 60;
    Deviation d;
    d.kind = ControlPerturbation::Kind::gain_scale;
    d.magnitude = 0.0;
    const MeanAndError delta = deviation_experiment(m, law, cfg, d);
    CHECK(delta.mean == 0.0);
    CHECK(delta.stderr_ == 0.0);
}

TEST_CASE("a large gain scaling hurts the deviating agent") {
    const ModelParams m = make_paper_sec4();
    const FeedbackLaw law = solve_law_for(m, 200);
    SimConfig cfg;
    cfg.N = 16;
    cfg.steps = 200;
    cfg.T = 10.0;
    cfg.replications = 64;
    cfg.seed = 61;
    Deviation d;
    d.kind = ControlPerturbation::Kind::gain_scale;
    d.magnitude = 0.5;
    const MeanAndError delta = deviation_experiment(m, law, cfg, d);
    CHECK(delta.mean > 3.0 * delta.stderr_);
}

TEST_CASE("gain-perturbation deviations are costly too") {
    const ModelParams m = make_paper_sec4();
    const FeedbackLaw law = solve_law_for(m, 200);
    SimConfig cfg;
    cfg.N = 16;
    cfg.steps = 200;
    cfg.T = 10.0;
    cfg.replications = 48;
    cfg.seed = 62;
    Deviation d;
    d.kind = ControlPerturbation::Kind::gain_perturb;
    d.gain_delta = (Mat(1, 2) << 0.8, -0.5).finished();
    const MeanAndError delta = deviation_experiment(m, law, cfg, d);
    CHECK(delta.mean > 3.0 * delta.stderr_);

    Deviation zero;
    zero.kind = ControlPerturbation::Kind::gain_perturb;
    zero.gain_delta = Mat::Zero(1, 2);
    const MeanAndError null_delta = deviation_experiment(m, law, cfg, zero);
    CHECK(null_delta.mean == 0.0);
}

TEST_CASE("rate fit recovers synthetic power laws") {
    std::vector<std::pair<double, double>> pairs;
    for (int N : {8, 16, 32, 64, 128})
        pairs.emplace_back(double(N), 1.0 / std::sqrt(double(N)));
    const RateFit half = epsilon_rate_fit(pairs);
    CHECK(std::abs(half.slope + 0.5) <= 1e-12);
    CHECK(half.r_squared >= 1.0 - 1e-12);

    pairs.clear();
    for (int N : {8, 16, 32, 64})
        pairs.emplace_back(double(N), 3.0 / double(N));
    const RateFit one = epsilon_rate_fit(pairs);
    CHECK(std::abs(one.slope + 1.0) <= 1e-12);
    CHECK(std::abs(std::exp(one.intercept) - 3.0) <= 1e-10);

    pairs.pop_back();
    CHECK_THROWS_AS(epsilon_rate_fit(pairs), ValidationError); // 3 points
}

TEST_CASE("common-random-number sweep couples adjacent population sizes") {
    const ModelParams m = make_paper_sec4();
    const FeedbackLaw law = solve_law_for(m, 150);
    SimConfig cfg;
    cfg.steps = 150;
    cfg.T = 10.0;
    cfg.replications = 48;
    cfg.seed = 70;
    const std::vector<SweepPoint> sweep = epsilon_sweep(m, law, cfg, {4, 8});
    REQUIRE(sweep.size() == 2);
    const auto& a = sweep[0].gap_sq;
    const auto& b = sweep[1].gap_sq;
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= double(a.size());
    mb /= double(b.size());
    double cov = 0;
    for (size_t i = 0; i < a.size(); ++i) cov += (a[i] - ma) * (b[i] - mb);
    cov /= double(a.size() - 1);
    CHECK(cov > 0.0); // shared streams induce positive coupling
}

TEST_SUITE_END();
