#include "mfg/model.hpp"

#include <cmath>

#include "mfg/errors.hpp"

namespace mfg {

Vec InitLaw::expectation() const {
    switch (kind) {
        case Kind::uniform: return 0.5 * (low + high);
        case Kind::gaussian: return mean;
        case Kind::constant: return value;
    }
    return Vec();
}

void InitLaw::validate(int n) const {
    auto check_dim = [n](const Vec& v, const char* what) {
        if (int(v.size()) != n) throw ValidationError(std::string("init law: ") + what + " has wrong dimension");
        if (!v.allFinite()) throw ValidationError(std::string("init law: ") + what + " has non-finite entries");
    };
    switch (kind) {
        case Kind::uniform:
            check_dim(low, "low");
            check_dim(high, "high");
            for (int i = 0; i < n; ++i)
                if (high(i) < low(i)) throw ValidationError("init law: uniform bounds inverted");
            break;
        case Kind::gaussian:
            check_dim(mean, "mean");
            check_dim(stddev, "stddev");
            for (int i = 0; i < n; ++i)
                if (stddev(i) < 0.0) throw ValidationError("init law: negative stddev");
            break;
        case Kind::constant:
            check_dim(value, "value");
            break;
    }
}

namespace {

void require_shape(const Mat& m, int rows, int cols, const char* name,
                   std::vector<ValidationReport::Check>* checks) {
    if (int(m.rows()) != rows || int(m.cols()) != cols)
        throw ValidationError(std::string("matrix ") + name + " has shape " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                              ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    if (!m.allFinite()) throw ValidationError(std::string("matrix ") + name + " has non-finite entries");
    if (checks)
        checks->push_back({std::string("shape ") + name, ValidationReport::Status::pass, ""});
}

// Exact symmetrization; asymmetry beyond 1e-12 is a data error, not noise.
void symmetrize_weight(Mat& m, const char* name) {
    const double asym = max_abs(m - m.transpose());
    const double scale = std::max(1.0, max_abs(m));
    if (asym > 1e-12 * scale)
        throw ValidationError(std::string("weight ") + name + " is asymmetric beyond tolerance (|M - M^T| = " +
                              std::to_string(asym) + ")");
    m = sym(m);
}

} // namespace

ValidationReport validate_model(ModelParams& params) {
    ValidationReport report;
    const int n = params.dims.n, r = params.dims.r;
    if (n < 1 || r < 1) throw ValidationError("dims must satisfy n >= 1, r >= 1");
    if (params.horizon.finite && !(params.horizon.T > 0.0))
        throw ValidationError("finite horizon requires T > 0");

    require_shape(params.A, n, n, "A", &report.checks);
    require_shape(params.G, n, n, "G", &report.checks);
    require_shape(params.C, n, n, "C", &report.checks);
    require_shape(params.F, n, n, "F", &report.checks);
    require_shape(params.C0, n, n, "C0", &report.checks);
    require_shape(params.F0, n, n, "F0", &report.checks);
    require_shape(params.B, n, r, "B", &report.checks);
    require_shape(params.D, n, r, "D", &report.checks);
    require_shape(params.D0, n, r, "D0", &report.checks);
    require_shape(params.Q, n, n, "Q", &report.checks);
    require_shape(params.H, n, n, "H", &report.checks);
    require_shape(params.R, r, r, "R", &report.checks);
    require_shape(params.Gamma, n, n, "Gamma", &report.checks);
    require_shape(params.Gamma0, n, n, "Gamma0", &report.checks);

    symmetrize_weight(params.Q, "Q");
    symmetrize_weight(params.R, "R");
    symmetrize_weight(params.H, "H");
    report.checks.push_back({"weights symmetric", ValidationReport::Status::pass, "Q, R, H symmetrized exactly"});

    if (int(params.eta0.size()) != n) throw ValidationError("eta0 has wrong dimension");
    if (!params.eta0.allFinite()) throw ValidationError("eta0 has non-finite entries");

    const double horizon_end = params.horizon.finite ? params.horizon.T : 0.0;
    for (const auto* sig : {&params.f, &params.sigma, &params.sigma0, &params.eta}) {
        if (sig->dim() != n) throw ValidationError("signal has wrong dimension");
        sig->validate(horizon_end);
    }
    report.checks.push_back({"signals evaluable", ValidationReport::Status::pass, ""});

    params.init_law.validate(n);
    if (int(params.init_mean.size()) != n) throw ValidationError("init_mean has wrong dimension");
    const Vec law_mean = params.init_law.expectation();
    if (max_abs(params.init_mean - law_mean) > 1e-12 * std::max(1.0, law_mean.cwiseAbs().maxCoeff()))
        throw ValidationError("init_mean disagrees with the mean of init_law");
    report.checks.push_back({"initial law", ValidationReport::Status::pass, "i.i.d. with finite second moment"});

    // Sufficient convexity certificate: PSD state/control/terminal weights.
    const double q_min = min_eig_sym(params.Q);
    const double r_min = min_eig_sym(params.R);
    const double h_min = min_eig_sym(params.H);
    const double tol = -1e-12;
    if (q_min >= tol && r_min >= tol && h_min >= tol) {
        report.convexity = ValidationReport::Status::pass;
        report.checks.push_back({"convexity certificate", ValidationReport::Status::pass,
                                 "Q, R, H all PSD (sufficient condition)"});
    } else {
        report.convexity = ValidationReport::Status::probe_needed;
        report.checks.push_back({"convexity certificate", ValidationReport::Status::probe_needed,
                                 "indefinite weight present; convexity must be probed"});
    }

    if (!params.horizon.finite) {
        // Stationary theory needs Q >= 0 and R > 0.
        const bool ok = q_min >= tol && r_min > 0.0;
        report.checks.push_back({"infinite-horizon weights",
                                 ok ? ValidationReport::Status::pass : ValidationReport::Status::fail,
                                 ok ? "Q PSD, R PD" : "infinite horizon requires Q >= 0 and R > 0"});
    }

    return report;
}

ModelParams discount_transform(const ModelParams& params, double rho) {
    if (rho < 0.0) throw ValidationError("discount rate must be nonnegative");
    if (!params.horizon.finite) throw ValidationError("discount transform applies to finite horizons");
    ModelParams out = params;
    if (rho == 0.0) return out;
    const int n = params.dims.n;
    out.A = params.A - 0.5 * rho * Mat::Identity(n, n);
    const double half = -0.5 * rho;
    out.f = params.f.exp_scaled(half);
    out.sigma = params.sigma.exp_scaled(half);
    out.sigma0 = params.sigma0.exp_scaled(half);
    out.eta = params.eta.exp_scaled(half);
    out.eta0 = std::exp(half * params.horizon.T) * params.eta0;
    return out;
}

CrossTermResult cross_term_transform(const ModelParams& params, const Mat& S) {
    const int n = params.dims.n, r = params.dims.r;
    if (int(S.rows()) != n || int(S.cols()) != r)
        throw ValidationError("cross-term matrix S must be n x r");
    Eigen::FullPivLU<Mat> lu(params.R);
    if (!lu.isInvertible()) throw ValidationError("cross-term transform requires invertible R");

    const Mat shift = lu.solve(S.transpose()); // R^{-1} S^T, r x n
    CrossTermResult result;
    result.shift_gain = shift;
    result.model = params;
    if (max_abs(S) == 0.0) return result;

    ModelParams& m = result.model;
    m.Q = sym(params.Q - S * shift);
    auto absorb_row = [&](Mat& drift_like, Mat& mf_like, Signal& offset, const Mat& ctrl) {
        drift_like -= ctrl * shift;
        mf_like += ctrl * shift * params.Gamma;
        offset = offset + params.eta.lmul(ctrl * shift);
    };
    absorb_row(m.A, m.G, m.f, params.B);
    absorb_row(m.C, m.F, m.sigma, params.D);
    absorb_row(m.C0, m.F0, m.sigma0, params.D0);
    return result;
}

} // namespace mfg
