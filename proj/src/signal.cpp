#include "mfg/signal.hpp"

#include <algorithm>
#include <cmath>

#include "mfg/errors.hpp"

namespace mfg {

Vec SignalTerm::eval(double t, int dim) const {
    Vec base = Vec::Zero(dim);
    switch (kind) {
        case Kind::constant:
            base = coeffs[0];
            break;
        case Kind::poly: {
            // Horner over vector coefficients.
            for (size_t k = coeffs.size(); k-- > 0;) base = base * t + coeffs[k];
            break;
        }
        case Kind::sinusoid:
            base = coeffs[0] * std::sin(omega * t + phase);
            break;
        case Kind::power:
            base = (t == 0.0) ? Vec(Vec::Zero(dim)) : Vec(coeffs[0] * std::pow(t, alpha));
            break;
        case Kind::tabulated: {
            if (t <= times.front()) {
                base = coeffs.front();
            } else if (t >= times.back()) {
                base = coeffs.back();
            } else {
                const auto it = std::upper_bound(times.begin(), times.end(), t);
                const size_t j = size_t(it - times.begin());
                const double t0 = times[j - 1], t1 = times[j];
                const double w = (t - t0) / (t1 - t0);
                base = (1.0 - w) * coeffs[j - 1] + w * coeffs[j];
            }
            break;
        }
    }
    if (exp_rate != 0.0) base *= std::exp(exp_rate * t);
    return base;
}

Signal Signal::constant(const Vec& v) {
    SignalTerm term;
    term.kind = SignalTerm::Kind::constant;
    term.coeffs = {v};
    return Signal(int(v.size()), {term});
}

Vec Signal::eval(double t) const {
    Vec out = Vec::Zero(dim_);
    for (const auto& term : terms_) out += term.eval(t, dim_);
    return out;
}

bool Signal::is_zero() const {
    for (const auto& term : terms_)
        for (const auto& c : term.coeffs)
            if (c.cwiseAbs().maxCoeff() != 0.0) return false;
    return true;
}

bool Signal::is_constant() const {
    for (const auto& term : terms_) {
        if (term.exp_rate != 0.0) return false;
        if (term.kind == SignalTerm::Kind::constant) continue;
        if (term.kind == SignalTerm::Kind::poly && term.coeffs.size() <= 1) continue;
        return false;
    }
    return true;
}

Signal Signal::exp_scaled(double rate) const {
    std::vector<SignalTerm> terms = terms_;
    for (auto& term : terms) term.exp_rate += rate;
    return Signal(dim_, std::move(terms));
}

Signal Signal::lmul(const Mat& m) const {
    if (int(m.cols()) != dim_) throw ValidationError("signal lmul: dimension mismatch");
    std::vector<SignalTerm> terms = terms_;
    for (auto& term : terms)
        for (auto& c : term.coeffs) c = m * c;
    return Signal(int(m.rows()), std::move(terms));
}

Signal Signal::operator+(const Signal& rhs) const {
    if (rhs.dim_ != dim_) throw ValidationError("signal sum: dimension mismatch");
    std::vector<SignalTerm> terms = terms_;
    terms.insert(terms.end(), rhs.terms_.begin(), rhs.terms_.end());
    return Signal(dim_, std::move(terms));
}

void Signal::validate(double horizon_end) const {
    for (const auto& term : terms_) {
        if (term.coeffs.empty()) throw ValidationError("signal term has no coefficients");
        for (const auto& c : term.coeffs) {
            if (int(c.size()) != dim_) throw ValidationError("signal term coefficient has wrong dimension");
            if (!c.allFinite()) throw ValidationError("signal term has non-finite coefficient");
        }
        if (term.kind == SignalTerm::Kind::power && term.alpha <= 0.0)
            throw ValidationError("power-law signal requires alpha > 0");
        if (term.kind == SignalTerm::Kind::tabulated) {
            if (term.times.size() != term.coeffs.size() || term.times.size() < 2)
                throw ValidationError("tabulated signal needs matching times/values, at least two nodes");
            for (size_t k = 1; k < term.times.size(); ++k)
                if (!(term.times[k] > term.times[k - 1]))
                    throw ValidationError("tabulated signal time grid must be strictly increasing");
            if (horizon_end > 0.0 &&
                (term.times.front() > 0.0 || term.times.back() < horizon_end))
                throw ValidationError("tabulated signal grid must span the horizon");
        }
    }
}

} // namespace mfg
