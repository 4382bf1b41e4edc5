#include <cmath>

#include "doctest.h"
#include "mfg/errors.hpp"
#include "mfg/model.hpp"
#include "mfg/model_io.hpp"
#include "mfg/rng.hpp"

#include <nlohmann/json.hpp>

using namespace mfg;

TEST_SUITE_BEGIN("model");

TEST_CASE("signal terms evaluate as specified") {
    SignalTerm poly;
    poly.kind = SignalTerm::Kind::poly;
    poly.coeffs = {(Vec(2) << 1.0, 0.0).finished(), (Vec(2) << 0.0, 2.0).finished(),
                   (Vec(2) << 3.0, 0.0).finished()};
    const Signal s(2, {poly});
    const Vec v = s.eval(2.0);
    CHECK(v(0) == doctest::Approx(1.0 + 3.0 * 4.0).epsilon(1e-15));
    CHECK(v(1) == doctest::Approx(2.0 * 2.0).epsilon(1e-15));

    SignalTerm sine;
    sine.kind = SignalTerm::Kind::sinusoid;
    sine.coeffs = {(Vec(1) << 0.05).finished()};
    sine.omega = 2.0;
    sine.phase = 0.3;
    CHECK(Signal(1, {sine}).eval(1.7)(0) == doctest::Approx(0.05 * std::sin(2.0 * 1.7 + 0.3)));

    SignalTerm pow_t;
    pow_t.kind = SignalTerm::Kind::power;
    pow_t.coeffs = {(Vec(1) << 0.1).finished()};
    pow_t.alpha = 0.5;
    CHECK(Signal(1, {pow_t}).eval(0.0)(0) == 0.0); // continuity at 0
    CHECK(Signal(1, {pow_t}).eval(4.0)(0) == doctest::Approx(0.2));

    SignalTerm tab;
    tab.kind = SignalTerm::Kind::tabulated;
    tab.times = {0.0, 1.0, 2.0};
    tab.coeffs = {(Vec(1) << 0.0).finished(), (Vec(1) << 2.0).finished(),
                  (Vec(1) << 2.0).finished()};
    CHECK(Signal(1, {tab}).eval(0.5)(0) == doctest::Approx(1.0));

    // envelope
    SignalTerm c;
    c.kind = SignalTerm::Kind::constant;
    c.coeffs = {(Vec(1) << 2.0).finished()};
    c.exp_rate = -0.5;
    CHECK(Signal(1, {c}).eval(3.0)(0) == doctest::Approx(2.0 * std::exp(-1.5)));
}

TEST_CASE("signal evaluation is deterministic bit-for-bit") {
    const ModelParams m = make_paper_sec4();
    for (double t : {0.0, 0.1, 1.7, 9.999}) {
        const Vec a = m.sigma.eval(t);
        const Vec b = m.sigma.eval(t);
        CHECK(a(0) == b(0));
        CHECK(a(1) == b(1));
    }
}

TEST_CASE("tabulated signal structural validation") {
    SignalTerm tab;
    tab.kind = SignalTerm::Kind::tabulated;
    tab.times = {0.0, 1.0, 1.0};
    tab.coeffs = {(Vec(1) << 0.0).finished(), (Vec(1) << 1.0).finished(),
                  (Vec(1) << 2.0).finished()};
    CHECK_THROWS_AS(Signal(1, {tab}).validate(1.0), ValidationError); // non-increasing grid

    tab.times = {0.0, 0.5, 1.0};
    CHECK_NOTHROW(Signal(1, {tab}).validate(1.0));
    CHECK_THROWS_AS(Signal(1, {tab}).validate(2.0), ValidationError); // does not span horizon
}

TEST_CASE("paper preset validates with the sufficient convexity certificate") {
    ModelParams m = make_paper_sec4();
    const ValidationReport report = validate_model(m);
    CHECK(report.ok());
    CHECK(report.convexity == ValidationReport::Status::pass);
}

TEST_CASE("zero weights trivially satisfy the certificate") {
    ModelParams m = make_paper_sec4();
    m.Q.setZero();
    m.R.setZero();
    m.H.setZero();
    const ValidationReport report = validate_model(m);
    CHECK(report.ok());
    CHECK(report.convexity == ValidationReport::Status::pass);
}

TEST_CASE("dimension errors name the offending matrix") {
    ModelParams m = make_paper_sec4();
    m.B = Mat::Zero(2, 2); // r = 1, so B must be 2x1
    try {
        validate_model(m);
        FAIL("expected a dimension error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("B") != std::string::npos);
    }
}

TEST_CASE("non-finite entries are a hard error") {
    ModelParams m = make_paper_sec4();
    m.A(0, 1) = std::nan("");
    CHECK_THROWS_AS(validate_model(m), ValidationError);
}

TEST_CASE("asymmetry beyond tolerance is an error, below it is repaired exactly") {
    ModelParams m = make_paper_sec4();
    m.Q(0, 1) += 1e-13; // below threshold: symmetrized
    CHECK_NOTHROW(validate_model(m));
    CHECK(m.Q(0, 1) == m.Q(1, 0));

    ModelParams bad = make_paper_sec4();
    bad.Q(0, 1) += 1e-6;
    CHECK_THROWS_AS(validate_model(bad), ValidationError);
}

TEST_CASE("sticky-price preset needs the convexity probe") {
    ModelParams m = make_sticky_price();
    const ValidationReport report = validate_model(m);
    CHECK(report.ok());
    CHECK(report.convexity == ValidationReport::Status::probe_needed);
}

TEST_CASE("discount transform identities") {
    const ModelParams m = make_paper_sec4();
    const ModelParams same = discount_transform(m, 0.0);
    CHECK(max_abs(same.A - m.A) == 0.0);
    CHECK(same.eta0 == m.eta0);
    for (double t : {0.0, 1.0, 5.0}) CHECK(max_abs(same.f.eval(t) - m.f.eval(t)) == 0.0);

    ModelParams scalar = m;
    scalar.dims = {1, 1};
    scalar.A = Mat::Zero(1, 1);
    scalar.B = Mat::Ones(1, 1);
    scalar.G = scalar.C = scalar.F = scalar.C0 = scalar.F0 = Mat::Zero(1, 1);
    scalar.D = scalar.D0 = Mat::Zero(1, 1);
    scalar.Q = scalar.R = scalar.H = Mat::Ones(1, 1);
    scalar.Gamma = scalar.Gamma0 = Mat::Zero(1, 1);
    scalar.f = Signal::zero(1);
    scalar.sigma = Signal::zero(1);
    scalar.sigma0 = Signal::zero(1);
    scalar.eta = Signal::zero(1);
    scalar.eta0 = Vec::Zero(1);
    scalar.init_law.kind = InitLaw::Kind::constant;
    scalar.init_law.value = Vec::Ones(1);
    scalar.init_mean = Vec::Ones(1);
    const ModelParams shifted = discount_transform(scalar, 0.2);
    CHECK(shifted.A(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));

    CHECK_THROWS_AS(discount_transform(m, -0.1), ValidationError);
}

namespace {

struct ScalarSde {
    double a, b, c, d, c0, d0;
    double f, sigma, sigma0; // constant offsets
};

// Test-local Euler walk for the discount oracle; production code is not
// involved in the stepping.
double simulate_discounted_cost(const ScalarSde& s, double q, double r, double h_term,
                                double eta, double eta0, double rho, double v0, double T,
                                int steps, uint64_t seed, int paths, double* stderr_out) {
    const double dt = T / steps;
    const double sq = std::sqrt(dt);
    double sum = 0.0, sumsq = 0.0;
    for (int p = 0; p < paths; ++p) {
        const NoiseStream wi(seed, uint32_t(p), 1, StreamKind::idiosyncratic);
        const NoiseStream w0(seed, uint32_t(p), 0, StreamKind::common);
        double y = 1.0, cost = 0.0;
        for (int k = 0; k < steps; ++k) {
            const double t = k * dt;
            const double disc = std::exp(-rho * t);
            const double w = (k == 0) ? 0.5 * dt : dt;
            cost += w * disc * (q * (y - eta) * (y - eta) + r * v0 * v0);
            y += (s.a * y + s.b * v0 + s.f) * dt + (s.c * y + s.d * v0 + s.sigma) * sq * wi.gaussian(uint32_t(k)) +
                 (s.c0 * y + s.d0 * v0 + s.sigma0) * sq * w0.gaussian(uint32_t(k));
        }
        cost += 0.5 * dt * std::exp(-rho * T) * (q * (y - eta) * (y - eta) + r * v0 * v0);
        cost += std::exp(-rho * T) * h_term * (y - eta0) * (y - eta0);
        sum += cost;
        sumsq += cost * cost;
    }
    const double mean = sum / paths;
    *stderr_out = std::sqrt((sumsq / paths - mean * mean) / (paths - 1));
    return mean;
}

double simulate_transformed_cost(const ModelParams& m, double rho, double v0, double T, int steps,
                                 uint64_t seed, int paths, double* stderr_out) {
    const double dt = T / steps;
    const double sq = std::sqrt(dt);
    double sum = 0.0, sumsq = 0.0;
    for (int p = 0; p < paths; ++p) {
        const NoiseStream wi(seed, uint32_t(p), 1, StreamKind::idiosyncratic);
        const NoiseStream w0(seed, uint32_t(p), 0, StreamKind::common);
        double x = 1.0, cost = 0.0;
        for (int k = 0; k < steps; ++k) {
            const double t = k * dt;
            const double u = std::exp(-0.5 * rho * t) * v0;
            const double w = (k == 0) ? 0.5 * dt : dt;
            const double dev = x - m.eta.eval(t)(0);
            cost += w * (m.Q(0, 0) * dev * dev + m.R(0, 0) * u * u);
            x += (m.A(0, 0) * x + m.B(0, 0) * u + m.f.eval(t)(0)) * dt +
                 (m.C(0, 0) * x + m.D(0, 0) * u + m.sigma.eval(t)(0)) * sq * wi.gaussian(uint32_t(k)) +
                 (m.C0(0, 0) * x + m.D0(0, 0) * u + m.sigma0.eval(t)(0)) * sq * w0.gaussian(uint32_t(k));
        }
        const double uT = std::exp(-0.5 * rho * T) * v0;
        const double devT = x - m.eta.eval(T)(0);
        cost += 0.5 * dt * (m.Q(0, 0) * devT * devT + m.R(0, 0) * uT * uT);
        const double dev0 = x - m.eta0(0);
        cost += m.H(0, 0) * dev0 * dev0;
        sum += cost;
        sumsq += cost * cost;
    }
    const double mean = sum / paths;
    *stderr_out = std::sqrt((sumsq / paths - mean * mean) / (paths - 1));
    return mean;
}

} // namespace

TEST_CASE("discounted cost of the original equals undiscounted cost of the transform") {
    // Scalar model with constant offsets, no mean-field coupling.
    ModelParams m;
    m.name = "discount-oracle";
    m.dims = {1, 1};
    m.horizon = Horizon::finite_horizon(1.0);
    m.A = Mat::Constant(1, 1, 0.3);
    m.B = Mat::Constant(1, 1, 1.0);
    m.G = m.F = m.F0 = Mat::Zero(1, 1);
    m.C = Mat::Constant(1, 1, 0.2);
    m.D = Mat::Constant(1, 1, 0.1);
    m.C0 = Mat::Constant(1, 1, 0.15);
    m.D0 = Mat::Constant(1, 1, 0.05);
    m.Q = Mat::Constant(1, 1, 1.0);
    m.R = Mat::Constant(1, 1, 0.5);
    m.H = Mat::Constant(1, 1, 0.7);
    m.Gamma = m.Gamma0 = Mat::Zero(1, 1);
    m.f = Signal::constant(Vec::Constant(1, 0.1));
    m.sigma = Signal::constant(Vec::Constant(1, 0.2));
    m.sigma0 = Signal::constant(Vec::Constant(1, 0.1));
    m.eta = Signal::constant(Vec::Constant(1, 0.3));
    m.eta0 = Vec::Constant(1, 0.4);
    m.init_law.kind = InitLaw::Kind::constant;
    m.init_law.value = Vec::Ones(1);
    m.init_mean = Vec::Ones(1);

    const double rho = 0.4, v0 = 0.3, T = 1.0;
    const int steps = 2000, paths = 1500;
    const ModelParams tm = discount_transform(m, rho);

    const ScalarSde orig{m.A(0, 0), m.B(0, 0), m.C(0, 0), m.D(0, 0), m.C0(0, 0), m.D0(0, 0),
                         0.1, 0.2, 0.1};
    double se1 = 0, se2 = 0;
    const double j_disc = simulate_discounted_cost(orig, 1.0, 0.5, 0.7, 0.3, 0.4, rho, v0, T,
                                                   steps, 99, paths, &se1);
    const double j_trans = simulate_transformed_cost(tm, rho, v0, T, steps, 99, paths, &se2);
    CHECK(std::abs(j_disc - j_trans) <= 3.0 * std::sqrt(se1 * se1 + se2 * se2));
}

TEST_CASE("cross-term transform identities") {
    const ModelParams m = make_paper_sec4();
    const CrossTermResult same = cross_term_transform(m, Mat::Zero(2, 1));
    CHECK(max_abs(same.model.Q - m.Q) == 0.0);
    CHECK(max_abs(same.model.A - m.A) == 0.0);
    for (double t : {0.0, 3.0}) CHECK(max_abs(same.model.f.eval(t) - m.f.eval(t)) == 0.0);

    ModelParams scalar = m;
    scalar.dims = {1, 1};
    scalar.A = scalar.G = scalar.C = scalar.F = scalar.C0 = scalar.F0 = Mat::Zero(1, 1);
    scalar.B = Mat::Ones(1, 1);
    scalar.D = scalar.D0 = Mat::Zero(1, 1);
    scalar.Q = Mat::Constant(1, 1, 2.0);
    scalar.R = Mat::Constant(1, 1, 0.5);
    scalar.H = Mat::Zero(1, 1);
    scalar.Gamma = scalar.Gamma0 = Mat::Zero(1, 1);
    scalar.f = Signal::zero(1);
    scalar.sigma = Signal::zero(1);
    scalar.sigma0 = Signal::zero(1);
    scalar.eta = Signal::zero(1);
    scalar.eta0 = Vec::Zero(1);
    scalar.init_law.kind = InitLaw::Kind::constant;
    scalar.init_law.value = Vec::Zero(1);
    scalar.init_mean = Vec::Zero(1);
    const CrossTermResult r = cross_term_transform(scalar, Mat::Ones(1, 1));
    CHECK(r.model.Q(0, 0) == doctest::Approx(0.0).epsilon(1e-15)); // 2 - 1 * 2 * 1

    ModelParams singular = scalar;
    singular.R = Mat::Zero(1, 1);
    CHECK_THROWS_AS(cross_term_transform(singular, Mat::Ones(1, 1)), ValidationError);
}

TEST_CASE("cross-term transform preserves pathwise cost and dynamics") {
    // 2-state, 1-control model with every coefficient exercised; a single
    // agent, so the mean-field term is the agent's own state.
    ModelParams m = make_paper_sec4();
    const Mat S = (Mat(2, 1) << 0.4, -0.2).finished();
    const CrossTermResult tr = cross_term_transform(m, S);
    const Mat shift = tr.shift_gain; // R^{-1} S^T

    const double T = 2.0;
    const int steps = 400;
    const double dt = T / steps;
    const double sq = std::sqrt(dt);
    const NoiseStream wi(7, 0, 1, StreamKind::idiosyncratic);
    const NoiseStream w0(7, 0, 0, StreamKind::common);

    Vec x = (Vec(2) << 1.0, -0.5).finished();
    double worst_cost_gap = 0.0, worst_dyn_gap = 0.0;
    for (int k = 0; k < steps; ++k) {
        const double t = k * dt;
        const Vec v = Vec::Constant(1, 0.3 * std::sin(t) + 0.1);
        const Vec dev = x - m.Gamma * x - m.eta.eval(t);
        const Vec u = v + shift * dev;

        // running integrands: original with cross term vs transformed
        const double orig = dev.dot(m.Q * dev) + v.dot(m.R * v) + 2.0 * dev.dot(S * v);
        const double trans = dev.dot(tr.model.Q * dev) + u.dot(tr.model.R * u);
        worst_cost_gap = std::max(worst_cost_gap, std::abs(orig - trans));

        const double zi = sq * wi.gaussian(uint32_t(k));
        const double z0 = sq * w0.gaussian(uint32_t(k));
        const Vec x_orig = x + (m.A * x + m.B * v + m.G * x + m.f.eval(t)) * dt +
                           (m.C * x + m.D * v + m.F * x + m.sigma.eval(t)) * zi +
                           (m.C0 * x + m.D0 * v + m.F0 * x + m.sigma0.eval(t)) * z0;
        const ModelParams& q = tr.model;
        const Vec x_trans = x + (q.A * x + q.B * u + q.G * x + q.f.eval(t)) * dt +
                            (q.C * x + q.D * u + q.F * x + q.sigma.eval(t)) * zi +
                            (q.C0 * x + q.D0 * u + q.F0 * x + q.sigma0.eval(t)) * z0;
        worst_dyn_gap = std::max(worst_dyn_gap, max_abs(x_orig - x_trans));
        x = x_orig;
    }
    CHECK(worst_cost_gap <= 1e-10);
    CHECK(worst_dyn_gap <= 1e-10);
}

TEST_CASE("model json round-trip") {
    for (const ModelParams& m : {make_paper_sec4(), make_sticky_price()}) {
        const nlohmann::json j = model_to_json(m);
        const ModelParams back = model_from_json(j);
        CHECK(model_to_json(back) == j);
    }

    // tabulated term with an exponential envelope survives the round trip
    ModelParams m = make_paper_sec4();
    SignalTerm tab;
    tab.kind = SignalTerm::Kind::tabulated;
    tab.times = {0.0, 2.5, 10.0};
    tab.coeffs = {(Vec(2) << 0.0, 1.0).finished(), (Vec(2) << 0.5, 0.25).finished(),
                  (Vec(2) << 1.0, 0.0).finished()};
    tab.exp_rate = -0.125;
    m.f = Signal(2, {tab});
    const nlohmann::json j = model_to_json(m);
    const ModelParams back = model_from_json(j);
    CHECK(model_to_json(back) == j);
    for (double t : {0.0, 1.3, 7.7}) CHECK(max_abs(back.f.eval(t) - m.f.eval(t)) == 0.0);
}

TEST_CASE("preset files match the built-ins") {
    for (const char* name : {"paper-sec4", "sticky-price"}) {
        const ModelParams file_model = load_model_file(std::string("presets/") + name + ".json");
        CHECK(model_to_json(file_model) == model_to_json(resolve_model(name)));
    }
}

TEST_CASE("init law mean consistency is enforced") {
    ModelParams m = make_paper_sec4();
    m.init_mean(0) += 0.5;
    CHECK_THROWS_AS(validate_model(m), ValidationError);
}

TEST_SUITE_END();
