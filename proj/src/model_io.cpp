#include "mfg/model_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "mfg/errors.hpp"

namespace mfg {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json mat_to_json(const Mat& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

Vec vec_from_json(const json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array");
    Vec v(j.size());
    for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(std::string(what) + ": expected numbers");
        v(Eigen::Index(i)) = j[i].get<double>();
    }
    return v;
}

Mat mat_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + ": expected an array of rows");
    // Scalar shorthand: a bare number is a 1x1 matrix.
    if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
    const size_t cols = j[0].is_array() ? j[0].size() : 1;
    Mat m(j.size(), cols);
    for (size_t i = 0; i < j.size(); ++i) {
        const json& row = j[i];
        if (row.is_number() && cols == 1) {
            m(Eigen::Index(i), 0) = row.get<double>();
            continue;
        }
        if (!row.is_array() || row.size() != cols)
            throw ConfigError(std::string(what) + ": ragged rows");
        for (size_t k = 0; k < cols; ++k) m(Eigen::Index(i), Eigen::Index(k)) = row[k].get<double>();
    }
    return m;
}

const char* term_kind_name(SignalTerm::Kind k) {
    switch (k) {
        case SignalTerm::Kind::constant: return "constant";
        case SignalTerm::Kind::poly: return "poly";
        case SignalTerm::Kind::sinusoid: return "sinusoid";
        case SignalTerm::Kind::power: return "power";
        case SignalTerm::Kind::tabulated: return "tabulated";
    }
    return "?";
}

json term_to_json(const SignalTerm& t) {
    json out;
    out["kind"] = term_kind_name(t.kind);
    if (t.exp_rate != 0.0) out["exp_rate"] = t.exp_rate;
    switch (t.kind) {
        case SignalTerm::Kind::constant:
            out["value"] = vec_to_json(t.coeffs[0]);
            break;
        case SignalTerm::Kind::poly: {
            json cs = json::array();
            for (const auto& c : t.coeffs) cs.push_back(vec_to_json(c));
            out["coeffs"] = cs;
            break;
        }
        case SignalTerm::Kind::sinusoid:
            out["amp"] = vec_to_json(t.coeffs[0]);
            out["omega"] = t.omega;
            out["phase"] = t.phase;
            break;
        case SignalTerm::Kind::power:
            out["coeff"] = vec_to_json(t.coeffs[0]);
            out["alpha"] = t.alpha;
            break;
        case SignalTerm::Kind::tabulated: {
            out["times"] = t.times;
            json vs = json::array();
            for (const auto& c : t.coeffs) vs.push_back(vec_to_json(c));
            out["values"] = vs;
            break;
        }
    }
    return out;
}

SignalTerm term_from_json(const json& j, const char* what) {
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError(std::string(what) + ": signal term must be an object with a kind");
    SignalTerm t;
    const std::string kind = j.at("kind").get<std::string>();
    t.exp_rate = j.value("exp_rate", 0.0);
    if (kind == "constant") {
        t.kind = SignalTerm::Kind::constant;
        t.coeffs = {vec_from_json(j.at("value"), what)};
    } else if (kind == "poly") {
        t.kind = SignalTerm::Kind::poly;
        for (const auto& c : j.at("coeffs")) t.coeffs.push_back(vec_from_json(c, what));
        if (t.coeffs.empty()) throw ConfigError(std::string(what) + ": poly needs coefficients");
    } else if (kind == "sinusoid") {
        t.kind = SignalTerm::Kind::sinusoid;
        t.coeffs = {vec_from_json(j.at("amp"), what)};
        t.omega = j.at("omega").get<double>();
        t.phase = j.value("phase", 0.0);
    } else if (kind == "power") {
        t.kind = SignalTerm::Kind::power;
        t.coeffs = {vec_from_json(j.at("coeff"), what)};
        t.alpha = j.at("alpha").get<double>();
    } else if (kind == "tabulated") {
        t.kind = SignalTerm::Kind::tabulated;
        t.times = j.at("times").get<std::vector<double>>();
        for (const auto& c : j.at("values")) t.coeffs.push_back(vec_from_json(c, what));
    } else {
        throw ConfigError(std::string(what) + ": unknown signal kind '" + kind + "'");
    }
    return t;
}

json signal_to_json(const Signal& s) {
    json out = json::array();
    for (const auto& t : s.terms()) out.push_back(term_to_json(t));
    return out;
}

Signal signal_from_json(const json& j, int dim, const char* what) {
    if (j.is_null()) return Signal::zero(dim);
    std::vector<SignalTerm> terms;
    if (j.is_object()) {
        terms.push_back(term_from_json(j, what));
    } else if (j.is_array()) {
        for (const auto& t : j) terms.push_back(term_from_json(t, what));
    } else {
        throw ConfigError(std::string(what) + ": signal must be a term or a list of terms");
    }
    return Signal(dim, std::move(terms));
}

json init_to_json(const InitLaw& law) {
    json out;
    switch (law.kind) {
        case InitLaw::Kind::uniform:
            out["kind"] = "uniform";
            out["low"] = vec_to_json(law.low);
            out["high"] = vec_to_json(law.high);
            break;
        case InitLaw::Kind::gaussian:
            out["kind"] = "gaussian";
            out["mean"] = vec_to_json(law.mean);
            out["stddev"] = vec_to_json(law.stddev);
            break;
        case InitLaw::Kind::constant:
            out["kind"] = "constant";
            out["value"] = vec_to_json(law.value);
            break;
    }
    return out;
}

InitLaw init_from_json(const json& j) {
    InitLaw law;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform") {
        law.kind = InitLaw::Kind::uniform;
        law.low = vec_from_json(j.at("low"), "init.low");
        law.high = vec_from_json(j.at("high"), "init.high");
    } else if (kind == "gaussian") {
        law.kind = InitLaw::Kind::gaussian;
        law.mean = vec_from_json(j.at("mean"), "init.mean");
        law.stddev = vec_from_json(j.at("stddev"), "init.stddev");
    } else if (kind == "constant") {
        law.kind = InitLaw::Kind::constant;
        law.value = vec_from_json(j.at("value"), "init.value");
    } else {
        throw ConfigError("init: unknown law kind '" + kind + "'");
    }
    return law;
}

} // namespace

json model_to_json(const ModelParams& p) {
    json j;
    j["name"] = p.name;
    j["dims"] = {{"n", p.dims.n}, {"r", p.dims.r}};
    if (p.horizon.finite)
        j["horizon"] = {{"kind", "finite"}, {"T", p.horizon.T}};
    else
        j["horizon"] = {{"kind", "infinite"}};
    json& m = j["matrices"];
    m["A"] = mat_to_json(p.A);
    m["B"] = mat_to_json(p.B);
    m["G"] = mat_to_json(p.G);
    m["C"] = mat_to_json(p.C);
    m["D"] = mat_to_json(p.D);
    m["F"] = mat_to_json(p.F);
    m["C0"] = mat_to_json(p.C0);
    m["D0"] = mat_to_json(p.D0);
    m["F0"] = mat_to_json(p.F0);
    m["Q"] = mat_to_json(p.Q);
    m["R"] = mat_to_json(p.R);
    m["H"] = mat_to_json(p.H);
    m["Gamma"] = mat_to_json(p.Gamma);
    m["Gamma0"] = mat_to_json(p.Gamma0);
    json& s = j["signals"];
    s["f"] = signal_to_json(p.f);
    s["sigma"] = signal_to_json(p.sigma);
    s["sigma0"] = signal_to_json(p.sigma0);
    s["eta"] = signal_to_json(p.eta);
    j["eta0"] = vec_to_json(p.eta0);
    j["init"] = init_to_json(p.init_law);
    return j;
}

ModelParams model_from_json(const json& j) {
    try {
        ModelParams p;
        p.name = j.value("name", "");
        p.dims.n = j.at("dims").at("n").get<int>();
        p.dims.r = j.at("dims").at("r").get<int>();
        const json& h = j.at("horizon");
        const std::string hk = h.at("kind").get<std::string>();
        if (hk == "finite")
            p.horizon = Horizon::finite_horizon(h.at("T").get<double>());
        else if (hk == "infinite")
            p.horizon = Horizon::infinite_horizon();
        else
            throw ConfigError("horizon.kind must be finite or infinite");
        const json& m = j.at("matrices");
        p.A = mat_from_json(m.at("A"), "A");
        p.B = mat_from_json(m.at("B"), "B");
        p.G = mat_from_json(m.at("G"), "G");
        p.C = mat_from_json(m.at("C"), "C");
        p.D = mat_from_json(m.at("D"), "D");
        p.F = mat_from_json(m.at("F"), "F");
        p.C0 = mat_from_json(m.at("C0"), "C0");
        p.D0 = mat_from_json(m.at("D0"), "D0");
        p.F0 = mat_from_json(m.at("F0"), "F0");
        p.Q = mat_from_json(m.at("Q"), "Q");
        p.R = mat_from_json(m.at("R"), "R");
        p.H = mat_from_json(m.at("H"), "H");
        p.Gamma = mat_from_json(m.at("Gamma"), "Gamma");
        p.Gamma0 = mat_from_json(m.at("Gamma0"), "Gamma0");
        const json& s = j.value("signals", json::object());
        p.f = signal_from_json(s.contains("f") ? s.at("f") : json(), p.dims.n, "signals.f");
        p.sigma = signal_from_json(s.contains("sigma") ? s.at("sigma") : json(), p.dims.n, "signals.sigma");
        p.sigma0 = signal_from_json(s.contains("sigma0") ? s.at("sigma0") : json(), p.dims.n, "signals.sigma0");
        p.eta = signal_from_json(s.contains("eta") ? s.at("eta") : json(), p.dims.n, "signals.eta");
        p.eta0 = j.contains("eta0") ? vec_from_json(j.at("eta0"), "eta0") : Vec(Vec::Zero(p.dims.n));
        p.init_law = init_from_json(j.at("init"));
        p.init_mean = p.init_law.expectation();
        return p;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model json: ") + e.what());
    }
}

ModelParams load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("model file parse error (" + path + "): " + e.what());
    }
    return model_from_json(j);
}

namespace {

SignalTerm poly_t(const Vec& slope) {
    SignalTerm t;
    t.kind = SignalTerm::Kind::poly;
    t.coeffs = {Vec::Zero(slope.size()), slope};
    return t;
}

SignalTerm power_t(const Vec& coeff, double alpha) {
    SignalTerm t;
    t.kind = SignalTerm::Kind::power;
    t.coeffs = {coeff};
    t.alpha = alpha;
    return t;
}

SignalTerm sin_t(const Vec& amp, double omega) {
    SignalTerm t;
    t.kind = SignalTerm::Kind::sinusoid;
    t.coeffs = {amp};
    t.omega = omega;
    return t;
}

} // namespace

ModelParams make_paper_sec4() {
    ModelParams p;
    p.name = "paper-sec4";
    p.dims = {2, 1};
    p.horizon = Horizon::finite_horizon(10.0);
    p.A = (Mat(2, 2) << 0.0, 1.0, -0.05, -0.1).finished();
    p.B = (Mat(2, 1) << 2.5, 1.6).finished();
    p.G = (Mat(2, 2) << 0.3, 0.1, 0.1, 0.3).finished();
    p.C = (Mat(2, 2) << 0.0, -0.8, 0.8, 0.4).finished();
    p.C0 = p.C;
    p.D = (Mat(2, 1) << 0.15, 0.05).finished();
    p.D0 = p.D;
    p.F = (Mat(2, 2) << 0.4, 0.2, 0.2, 0.4).finished();
    p.F0 = p.F;
    p.Gamma = 0.5 * Mat::Identity(2, 2);
    p.Gamma0 = 0.2 * Mat::Identity(2, 2);
    p.Q = (Mat(2, 2) << 2.0, 1.0, 1.0, 2.0).finished();
    p.R = Mat::Constant(1, 1, 0.3);
    p.H = 0.5 * Mat::Identity(2, 2);

    p.f = Signal(2, {poly_t((Vec(2) << 0.05, 0.0).finished()),
                     power_t((Vec(2) << 0.0, 0.05).finished(), 1.5)});
    p.sigma = Signal(2, {sin_t((Vec(2) << 0.05, 0.0).finished(), 1.0),
                         power_t((Vec(2) << 0.0, 0.05).finished(), 0.5)});
    p.sigma0 = Signal(2, {poly_t((Vec(2) << 0.05, 0.0).finished()),
                          power_t((Vec(2) << 0.0, 0.05).finished(), 0.5)});
    p.eta = Signal(2, {poly_t((Vec(2) << 0.1, 0.0).finished()),
                       power_t((Vec(2) << 0.0, 0.1).finished(), 0.5)});
    p.eta0 = (Vec(2) << 0.5, 0.5).finished();

    p.init_law.kind = InitLaw::Kind::uniform;
    p.init_law.low = Vec::Zero(2);
    p.init_law.high = (Vec(2) << 5.0, 2.0).finished();
    p.init_mean = p.init_law.expectation();
    return p;
}

ModelParams make_sticky_price() {
    // Production-output adjustment under a noisy sticky price. State is
    // (q_i, p_i) where p_i is each firm's copy of the shared price process;
    // the copies coincide pathwise because the price row carries no
    // idiosyncratic noise and all agents start from the same price.
    const double mu = 0.5;      // output adjustment friction
    const double b = 1.0;       // control effectiveness
    const double rho_q = 0.1;   // output volatility scale
    const double rho_u = 0.1;   // adjustment volatility scale
    const double alpha = 0.8;   // price adjustment speed
    const double beta = 5.0;    // demand intercept
    const double sig_p = 0.1;   // price volatility
    const double sig_s = 0.1;   // supply-driven price volatility
    const double r_cost = 1.0;  // adjustment cost rate
    const double gamma = 0.5;   // terminal cost rate
    const double c_run = 2.0;   // running production cost
    const double c_term = 2.0;  // terminal reference price

    ModelParams p;
    p.name = "sticky-price";
    p.dims = {2, 1};
    p.horizon = Horizon::finite_horizon(10.0);
    p.A = (Mat(2, 2) << -mu, 0.0, 0.0, alpha).finished();
    p.B = (Mat(2, 1) << b, 0.0).finished();
    p.G = (Mat(2, 2) << 0.0, 0.0, -alpha, 0.0).finished();
    p.C = (Mat(2, 2) << rho_q, 0.0, 0.0, 0.0).finished();
    p.D = (Mat(2, 1) << rho_u, 0.0).finished();
    p.F = Mat::Zero(2, 2);
    p.C0 = (Mat(2, 2) << 0.0, 0.0, 0.0, sig_p).finished();
    p.D0 = Mat::Zero(2, 1);
    p.F0 = (Mat(2, 2) << 0.0, 0.0, sig_s, 0.0).finished();
    p.Gamma = Mat::Zero(2, 2);
    p.Gamma0 = Mat::Zero(2, 2);
    // -p q + c q is the quadratic form of the indefinite weight below with
    // offset eta = (0, c); same construction at the terminal time.
    p.Q = (Mat(2, 2) << 0.0, -0.5, -0.5, 0.0).finished();
    p.R = Mat::Constant(1, 1, r_cost);
    p.H = (Mat(2, 2) << 0.0, -0.5 * gamma, -0.5 * gamma, 0.0).finished();

    p.f = Signal::constant((Vec(2) << 0.0, alpha * beta).finished());
    p.sigma = Signal::zero(2);
    p.sigma0 = Signal::zero(2);
    p.eta = Signal::constant((Vec(2) << 0.0, c_run).finished());
    p.eta0 = (Vec(2) << 0.0, c_term).finished();

    p.init_law.kind = InitLaw::Kind::uniform;
    p.init_law.low = (Vec(2) << 1.0, 2.0).finished();
    p.init_law.high = (Vec(2) << 3.0, 2.0).finished();
    p.init_mean = p.init_law.expectation();
    return p;
}

ModelParams resolve_model(const std::string& name_or_path) {
    if (name_or_path == "paper-sec4") return make_paper_sec4();
    if (name_or_path == "sticky-price") return make_sticky_price();
    return load_model_file(name_or_path);
}

} // namespace mfg
