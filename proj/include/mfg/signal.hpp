#pragma once

#include <vector>

#include "mfg/linalg.hpp"

namespace mfg {

// Deterministic R^n-valued function of time, stored as a sum of primitive
// terms. A term evaluates to
//
//   e^{exp_rate * t} * base(t)
//
// where base is one of: constant, polynomial in t, a * sin(omega t + phase),
// power law c * t^alpha, or a tabulated grid with linear interpolation.
// Sums and left matrix multiplication keep the representation closed, which
// is what the model-reduction transforms need.
struct SignalTerm {
    enum class Kind { constant, poly, sinusoid, power, tabulated };

    Kind kind = Kind::constant;
    double exp_rate = 0.0;

    // constant: coeffs[0]
    // poly:     coeffs[k] multiplies t^k
    // sinusoid: coeffs[0] * sin(omega t + phase)
    // power:    coeffs[0] * t^alpha  (evaluates to 0 at t=0 for alpha > 0)
    // tabulated: coeffs[k] is the value at times[k]; times strictly increasing
    std::vector<Vec> coeffs;
    double omega = 0.0;
    double phase = 0.0;
    double alpha = 0.0;
    std::vector<double> times;

    Vec eval(double t, int dim) const;
};

class Signal {
public:
    Signal() = default;
    Signal(int dim, std::vector<SignalTerm> terms) : dim_(dim), terms_(std::move(terms)) {}

    static Signal zero(int dim) { return Signal(dim, {}); }
    static Signal constant(const Vec& v);

    int dim() const { return dim_; }
    const std::vector<SignalTerm>& terms() const { return terms_; }

    Vec eval(double t) const;

    bool is_zero() const;
    // True when every term is a constant with no exponential envelope.
    bool is_constant() const;

    // e^{rate * t} * this.
    Signal exp_scaled(double rate) const;
    // m * this (m is dim_out x dim_in).
    Signal lmul(const Mat& m) const;
    Signal operator+(const Signal& rhs) const;

    // Structural checks; throws ValidationError on malformed terms.
    void validate(double horizon_end) const;

private:
    int dim_ = 0;
    std::vector<SignalTerm> terms_;
};

} // namespace mfg
