#pragma once

// Continuous and discrete single-input single-output linear systems.
//
// RationalTF holds num(s)/den(s) with dense coefficient vectors in descending
// powers of s. DiscreteTF holds num(z^-1)/den(z^-1) in ascending powers of
// z^-1 with den[0] == 1. Everything is templated on the real scalar type;
// the rest of the library uses the double aliases at the bottom.

#include "sea/error.hpp"
#include "sea/poly.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <numbers>
#include <sstream>
#include <vector>

namespace sea {

template <typename Scalar>
class RationalTF
{
public:
    using Poly = Vec<Scalar>;

    RationalTF() : num_(Poly::Zero(1)), den_(Poly::Ones(1)) {}

    RationalTF(const Poly& num, const Poly& den) : num_(poly::trim(num)), den_(poly::trim(den))
    {
        if (den.size() == 0 || poly::is_zero(den_))
            throw Error(Errc::invalid_argument, "transfer function denominator is zero");
        if (num.size() == 0)
            num_ = Poly::Zero(1);
        if (!den_.allFinite() || !num_.allFinite())
            throw Error(Errc::invalid_argument, "transfer function has non-finite coefficients");
    }

    RationalTF(std::initializer_list<Scalar> num, std::initializer_list<Scalar> den)
        : RationalTF(from_list(num), from_list(den))
    {}

    static RationalTF constant(Scalar k) { return RationalTF(Poly::Constant(1, k), Poly::Ones(1)); }

    const Poly& num() const { return num_; }
    const Poly& den() const { return den_; }

    Eigen::Index order() const { return den_.size() - 1; }
    Eigen::Index relative_degree() const { return den_.size() - num_.size(); }
    bool is_zero() const { return poly::is_zero(num_); }
    bool is_proper() const { return is_zero() || num_.size() <= den_.size(); }

    /// Same system with a monic denominator.
    RationalTF normalized() const { return RationalTF(num_ / den_(0), den_ / den_(0)); }

    Scalar dc_gain() const
    {
        const Scalar d = den_(den_.size() - 1);
        if (d == Scalar(0))
            throw Error(Errc::evaluation_singularity, "pole at the origin: DC gain is unbounded");
        return num_(num_.size() - 1) / d;
    }

private:
    static Poly from_list(std::initializer_list<Scalar> values)
    {
        Poly p(static_cast<Eigen::Index>(values.size()));
        std::copy(values.begin(), values.end(), p.data());
        return p;
    }

    Poly num_;
    Poly den_;
};

/// Removes common factors of s shared by numerator and denominator.
template <typename Scalar>
RationalTF<Scalar> cancel_origin(const RationalTF<Scalar>& g)
{
    if (g.is_zero())
        return RationalTF<Scalar>();
    Vec<Scalar> num = g.num();
    Vec<Scalar> den = g.den();
    while (num.size() > 1 && den.size() > 1 && num(num.size() - 1) == Scalar(0) &&
           den(den.size() - 1) == Scalar(0)) {
        num.conservativeResize(num.size() - 1);
        den.conservativeResize(den.size() - 1);
    }
    return RationalTF<Scalar>(num, den);
}

template <typename Scalar>
RationalTF<Scalar> operator*(const RationalTF<Scalar>& a, const RationalTF<Scalar>& b)
{
    if (a.is_zero() || b.is_zero())
        return RationalTF<Scalar>();
    return cancel_origin(RationalTF<Scalar>(poly::mul<Scalar>(a.num(), b.num()), poly::mul<Scalar>(a.den(), b.den())));
}

template <typename Scalar>
RationalTF<Scalar> operator*(Scalar k, const RationalTF<Scalar>& g)
{
    if (k == Scalar(0))
        return RationalTF<Scalar>();
    return RationalTF<Scalar>(k * g.num(), g.den());
}

template <typename Scalar>
RationalTF<Scalar> operator*(const RationalTF<Scalar>& g, Scalar k)
{
    return k * g;
}

template <typename Scalar>
RationalTF<Scalar> operator-(const RationalTF<Scalar>& g)
{
    return RationalTF<Scalar>(-g.num(), g.den());
}

template <typename Scalar>
RationalTF<Scalar> operator+(const RationalTF<Scalar>& a, const RationalTF<Scalar>& b)
{
    if (a.is_zero())
        return b;
    if (b.is_zero())
        return a;
    const Vec<Scalar> num = poly::add<Scalar>(poly::mul<Scalar>(a.num(), b.den()), poly::mul<Scalar>(b.num(), a.den()));
    return cancel_origin(RationalTF<Scalar>(num, poly::mul<Scalar>(a.den(), b.den())));
}

template <typename Scalar>
RationalTF<Scalar> operator-(const RationalTF<Scalar>& a, const RationalTF<Scalar>& b)
{
    return a + (-b);
}

template <typename Scalar>
RationalTF<Scalar> inverse(const RationalTF<Scalar>& g)
{
    if (g.is_zero())
        throw Error(Errc::invalid_argument, "cannot invert a zero transfer function");
    return RationalTF<Scalar>(g.den(), g.num());
}

template <typename Scalar>
RationalTF<Scalar> operator/(const RationalTF<Scalar>& a, const RationalTF<Scalar>& b)
{
    return a * inverse(b);
}

/// Negative feedback g / (1 + g h).
template <typename Scalar>
RationalTF<Scalar> feedback(const RationalTF<Scalar>& g, const RationalTF<Scalar>& h)
{
    if (g.is_zero())
        return RationalTF<Scalar>();
    const Vec<Scalar> num = poly::mul<Scalar>(g.num(), h.den());
    const Vec<Scalar> den = poly::add<Scalar>(poly::mul<Scalar>(g.den(), h.den()), poly::mul<Scalar>(g.num(), h.num()));
    return cancel_origin(RationalTF<Scalar>(num, den));
}

/// num(jw) / den(jw).
template <typename Scalar>
std::complex<Scalar> freq_response(const RationalTF<Scalar>& tf, Scalar omega)
{
    if (!(omega >= Scalar(0)))
        throw Error(Errc::invalid_argument, "frequency must be non-negative");
    using C = std::complex<Scalar>;
    const C s(Scalar(0), omega);
    const C den = poly::eval(tf.den(), s);
    const Scalar scale = poly::eval_scale(tf.den(), omega);
    if (std::abs(den) <= Scalar(16) * std::numeric_limits<Scalar>::epsilon() * scale) {
        std::ostringstream msg;
        msg << "pole on the imaginary axis at omega = " << omega << " rad/s";
        throw Error(Errc::evaluation_singularity, msg.str());
    }
    return poly::eval(tf.num(), s) / den;
}

template <typename Scalar>
Scalar magnitude(const RationalTF<Scalar>& tf, Scalar omega)
{
    return std::abs(freq_response(tf, omega));
}

/// Lowest frequency (Hz) where |tf| falls to |tf(0)|/sqrt(2). Searched on
/// [1e-4, 1e6] Hz by a log grid scan followed by bisection.
template <typename Scalar>
Scalar bandwidth_3db(const RationalTF<Scalar>& tf)
{
    const Scalar dc = std::abs(freq_response(tf, Scalar(0)));
    if (!(dc > Scalar(0)) || !std::isfinite(dc))
        throw Error(Errc::invalid_argument, "bandwidth needs a finite nonzero DC gain");
    const Scalar level = dc / std::sqrt(Scalar(2));
    const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
    auto below = [&](Scalar f) { return magnitude(tf, two_pi * f) < level; };

    constexpr int points_per_decade = 100;
    const Scalar f_lo = Scalar(1e-4), f_hi = Scalar(1e6);
    if (below(f_lo))
        throw Error(Errc::no_bandwidth, "response is already below -3 dB at the bottom of the search range");
    const int steps = 10 * points_per_decade;
    Scalar prev = f_lo;
    for (int k = 1; k <= steps; ++k) {
        const Scalar f = f_lo * std::pow(Scalar(10), Scalar(k) / points_per_decade);
        if (below(f)) {
            Scalar lo = prev, hi = f;
            while (hi - lo > Scalar(1e-10) * hi) {
                const Scalar mid = Scalar(0.5) * (lo + hi);
                (below(mid) ? hi : lo) = mid;
            }
            return Scalar(0.5) * (lo + hi);
        }
        prev = f;
    }
    throw Error(Errc::no_bandwidth, "response never falls below -3 dB within [1e-4, 1e6] Hz");
}

/// Butterworth low-pass of the given order with unity DC gain.
template <typename Scalar>
RationalTF<Scalar> butterworth_lowpass(int order, Scalar cutoff)
{
    if (order < 1 || !(cutoff > Scalar(0)))
        throw Error(Errc::invalid_argument, "Butterworth filter needs order >= 1 and cutoff > 0");
    using C = std::complex<Scalar>;
    const Scalar pi = std::numbers::pi_v<Scalar>;
    Vec<C> den = Vec<C>::Ones(1);
    for (int k = 1; k <= order; ++k) {
        const Scalar angle = pi / Scalar(2) + pi * Scalar(2 * k - 1) / Scalar(2 * order);
        Vec<C> factor(2);
        factor << C(1), -cutoff * std::polar(Scalar(1), angle);
        den = poly::mul<C>(den, factor);
    }
    return RationalTF<Scalar>(Vec<Scalar>::Constant(1, std::pow(cutoff, order)), den.real());
}

template <typename Scalar>
struct StateSpace
{
    Mat<Scalar> A, B, C, D;

    Eigen::Index states() const { return A.rows(); }
};

/// Controllable canonical realization of a proper transfer function.
template <typename Scalar>
StateSpace<Scalar> tf_to_ss(const RationalTF<Scalar>& tf)
{
    if (!tf.is_proper())
        throw Error(Errc::improper_system, "improper transfer function has no state-space realization");
    const RationalTF<Scalar> g = tf.normalized();
    const Eigen::Index n = g.order();
    Vec<Scalar> b = Vec<Scalar>::Zero(n + 1);
    b.tail(g.num().size()) = g.num();
    const Vec<Scalar>& a = g.den();

    StateSpace<Scalar> ss;
    ss.D = Mat<Scalar>::Constant(1, 1, b(0));
    ss.A = Mat<Scalar>::Zero(n, n);
    ss.B = Mat<Scalar>::Zero(n, 1);
    ss.C = Mat<Scalar>::Zero(1, n);
    if (n == 0)
        return ss;
    ss.A.row(0) = -a.tail(n).transpose();
    if (n > 1)
        ss.A.bottomLeftCorner(n - 1, n - 1).setIdentity();
    ss.B(0, 0) = Scalar(1);
    ss.C.row(0) = (b.tail(n) - b(0) * a.tail(n)).transpose();
    return ss;
}

template <typename Scalar>
Mat<std::complex<Scalar>> freq_response(const StateSpace<Scalar>& ss, Scalar omega)
{
    using C = std::complex<Scalar>;
    Mat<C> out = ss.D.template cast<C>();
    if (ss.states() == 0)
        return out;
    Mat<C> resolvent = -ss.A.template cast<C>();
    resolvent.diagonal().array() += C(Scalar(0), omega);
    out += ss.C.template cast<C>() * resolvent.partialPivLu().solve(ss.B.template cast<C>());
    return out;
}

template <typename Scalar>
class DiscreteTF
{
public:
    using Poly = Vec<Scalar>;

    DiscreteTF() : num_(Poly::Zero(1)), den_(Poly::Ones(1)) {}

    DiscreteTF(const Poly& num, const Poly& den, Scalar sample_period)
        : num_(num), den_(den), sample_period_(sample_period)
    {
        if (!(sample_period > Scalar(0)))
            throw Error(Errc::invalid_argument, "sample period must be positive");
        if (den.size() == 0 || den(0) == Scalar(0))
            throw Error(Errc::invalid_argument, "discrete denominator must have a nonzero leading term");
        num_ /= den(0);
        den_ /= den(0);
    }

    const Poly& num() const { return num_; }
    const Poly& den() const { return den_; }
    Scalar sample_period() const { return sample_period_; }

    Scalar dc_gain() const { return num_.sum() / den_.sum(); }

    std::complex<Scalar> freq_response(Scalar omega) const
    {
        using C = std::complex<Scalar>;
        const C w = std::polar(Scalar(1), -omega * sample_period_);
        auto eval_ascending = [&](const Poly& p) {
            C acc(0);
            for (Eigen::Index i = p.size() - 1; i >= 0; --i)
                acc = acc * w + C(p(i));
            return acc;
        };
        return eval_ascending(num_) / eval_ascending(den_);
    }

    /// Poles in the z-plane.
    Vec<std::complex<Scalar>> poles() const { return poly::roots<Scalar>(den_); }

    bool is_stable() const
    {
        const auto p = poles();
        return p.size() == 0 || (p.array().abs() < Scalar(1)).all();
    }

private:
    Poly num_;
    Poly den_;
    Scalar sample_period_ = Scalar(1);
};

namespace detail {

/// Ascending coefficients of (1 + sign*w)^k.
template <typename Scalar>
Vec<Scalar> unit_binomial(Scalar sign, Eigen::Index k)
{
    Vec<Scalar> out = Vec<Scalar>::Zero(k + 1);
    Scalar c(1);
    for (Eigen::Index i = 0; i <= k; ++i) {
        out(i) = c;
        c = c * Scalar(k - i) / Scalar(i + 1) * sign;
    }
    return out;
}

template <typename Scalar>
Vec<Scalar> bilinear_map(const Vec<Scalar>& descending, Eigen::Index n, Scalar k)
{
    Vec<Scalar> padded = Vec<Scalar>::Zero(n + 1);
    padded.tail(descending.size()) = descending;
    Vec<Scalar> out = Vec<Scalar>::Zero(n + 1);
    for (Eigen::Index i = 0; i <= n; ++i) {
        const Eigen::Index power = n - i;
        if (padded(i) == Scalar(0))
            continue;
        const Vec<Scalar> term = poly::mul<Scalar>(unit_binomial(Scalar(-1), power), unit_binomial(Scalar(1), n - power));
        out += padded(i) * std::pow(k, Scalar(power)) * term;
    }
    return out;
}

} // namespace detail

/// Bilinear (trapezoidal) discretization s -> (2/Ts)(1 - z^-1)/(1 + z^-1).
template <typename Scalar>
DiscreteTF<Scalar> discretize(const RationalTF<Scalar>& tf, Scalar sample_period)
{
    if (!(sample_period > Scalar(0)))
        throw Error(Errc::invalid_argument, "sample period must be positive");
    if (!tf.is_proper())
        throw Error(Errc::improper_system, "cannot discretize an improper transfer function");
    const Scalar k = Scalar(2) / sample_period;
    const Eigen::Index n = tf.order();
    const Vec<Scalar> den = detail::bilinear_map(tf.den(), n, k);
    if (std::abs(den(0)) <= Scalar(16) * std::numeric_limits<Scalar>::epsilon() * poly::eval_scale(tf.den(), k))
        throw Error(Errc::discretization_singularity, "pole at s = 2/Ts maps to infinity under the bilinear transform");
    return DiscreteTF<Scalar>(detail::bilinear_map(tf.num(), n, k), den, sample_period);
}

/// Runtime filter state for a DiscreteTF, transposed direct form II.
template <typename Scalar>
class DiscreteFilter
{
public:
    DiscreteFilter() = default;

    explicit DiscreteFilter(const DiscreteTF<Scalar>& tf)
    {
        const Eigen::Index n = std::max(tf.num().size(), tf.den().size());
        b_ = Vec<Scalar>::Zero(n);
        a_ = Vec<Scalar>::Zero(n);
        b_.head(tf.num().size()) = tf.num();
        a_.head(tf.den().size()) = tf.den();
        state_ = Vec<Scalar>::Zero(n);
    }

    Scalar step(Scalar x)
    {
        if (b_.size() == 0)
            return Scalar(0);
        const Scalar y = b_(0) * x + state_(0);
        const Eigen::Index n = b_.size();
        for (Eigen::Index i = 0; i + 1 < n; ++i)
            state_(i) = b_(i + 1) * x - a_(i + 1) * y + (i + 2 < n ? state_(i + 1) : Scalar(0));
        return y;
    }

    void reset() { state_.setZero(); }

    const Vec<Scalar>& state() const { return state_; }

private:
    Vec<Scalar> b_, a_, state_;
};

using TransferFunction = RationalTF<double>;
using StateSpaceModel = StateSpace<double>;
using DiscreteTransferFunction = DiscreteTF<double>;

} // namespace sea
