#include "sea/electromech.hpp"

#include <cmath>
#include <sstream>

namespace sea {

namespace {

void require_positive(double value, const char* name)
{
    if (!(value > 0.0) || !std::isfinite(value)) {
        std::ostringstream msg;
        msg << name << " must be positive and finite (got " << value << ")";
        throw Error(Errc::invalid_argument, msg.str());
    }
}

Vec<double> coeffs(std::initializer_list<double> values)
{
    Vec<double> p(static_cast<Eigen::Index>(values.size()));
    std::copy(values.begin(), values.end(), p.data());
    return p;
}

} // namespace

void MotorParams::validate() const
{
    require_positive(R, "motor.R");
    require_positive(L, "motor.L");
    require_positive(K_e, "motor.K_e");
    require_positive(K_tau, "motor.K_tau");
    require_positive(J_m, "motor.J_m");
    require_positive(B_m, "motor.B_m");
}

void SeaParams::validate() const
{
    motor.validate();
    // K_s = 0 is allowed: a springless drive is a free integrator.
    if (!(K_s >= 0.0) || !std::isfinite(K_s))
        throw Error(Errc::invalid_argument, "sea.K_s must be non-negative and finite");
    require_positive(V_nominal, "sea.V_nominal");
    if (!(N > 1.0))
        throw Error(Errc::invalid_argument, "sea.N must exceed 1");
}

void LoadParams::validate() const
{
    if (!locked)
        require_positive(J_l, "load.J_l");
    if (!(B_l >= 0.0))
        throw Error(Errc::invalid_argument, "load.B_l must be non-negative");
}

TransferFunction electrical_tf(const SeaParams& p)
{
    return TransferFunction({p.motor.K_tau}, {p.motor.L, p.motor.R});
}

TransferFunction mechanical_tf(const SeaParams& p)
{
    return TransferFunction({1.0}, {p.motor.J_m, p.motor.B_m, 0.0});
}

TransferFunction load_tf(const LoadParams& l)
{
    if (l.locked)
        return TransferFunction();
    return TransferFunction({1.0}, {l.J_l, l.B_l, 0.0});
}

TfMatrix3 mimo_matrix(const SeaParams& p, const LoadParams& l)
{
    p.validate();
    l.validate();
    // With P_m = 1/a and P_l = b/c, multiplying D through by a c gives
    // Delta = a c + (K_s/N^2) c + K_s b a and every entry becomes poly/Delta.
    const Vec<double> a = coeffs({p.motor.J_m, p.motor.B_m, 0.0});
    const Vec<double> b = l.locked ? coeffs({0.0}) : coeffs({1.0});
    const Vec<double> c = l.locked ? coeffs({1.0}) : coeffs({l.J_l, l.B_l, 0.0});
    const double inv_n = 1.0 / p.N;
    const double k2 = p.K_s * inv_n * inv_n;

    const Vec<double> ab = poly::mul<double>(a, b);
    const Vec<double> delta = poly::add<double>(poly::add<double>(poly::mul<double>(a, c), k2 * c), p.K_s * ab);
    auto entry = [&](const Vec<double>& numerator) { return cancel_origin(TransferFunction(numerator, delta)); };

    TfMatrix3 m;
    m[0][0] = entry(inv_n * c);
    m[0][1] = entry(-poly::add<double>(inv_n * inv_n * c, ab));
    m[0][2] = entry(-ab);
    m[1][0] = entry(p.K_s * inv_n * b);
    m[1][1] = entry(ab);
    m[1][2] = entry(poly::add<double>(ab, k2 * b));
    m[2][0] = entry(poly::add<double>(c, p.K_s * b));
    m[2][1] = entry(-inv_n * c);
    m[2][2] = entry(p.K_s * inv_n * b);
    return m;
}

TransferFunction output_locked_tf(const SeaParams& p)
{
    p.validate();
    const auto& m = p.motor;
    const double n2 = p.N * p.N;
    const double a3 = m.J_m * m.L;
    const double a2 = m.B_m * m.L + m.J_m * m.R;
    const double a1 = m.K_e * m.K_tau + p.K_s * m.L / n2 + m.B_m * m.R;
    const double a0 = p.K_s * m.R / n2;
    return TransferFunction({m.K_tau / p.N}, {a3, a2, a1, a0});
}

TransferFunction voltage_to_deflection_tf(const SeaParams& p, const LoadParams& l)
{
    p.validate();
    l.validate();
    // tau_m = P_e (V - s K_e theta_m) with theta_d = (n11/Delta) tau_m and
    // theta_m = (n31/Delta) tau_m. Clearing denominators:
    //   theta_d / V = K_tau n11 / (Delta (L s + R) + K_e K_tau s n31).
    const Vec<double> a = coeffs({p.motor.J_m, p.motor.B_m, 0.0});
    const Vec<double> b = l.locked ? coeffs({0.0}) : coeffs({1.0});
    const Vec<double> c = l.locked ? coeffs({1.0}) : coeffs({l.J_l, l.B_l, 0.0});
    const double k2 = p.K_s / (p.N * p.N);
    const Vec<double> delta =
        poly::add<double>(poly::add<double>(poly::mul<double>(a, c), k2 * c), p.K_s * poly::mul<double>(a, b));
    const Vec<double> n11 = c / p.N;
    const Vec<double> n31 = poly::add<double>(c, p.K_s * b);
    const Vec<double> electrical = coeffs({p.motor.L, p.motor.R});
    const Vec<double> emf = coeffs({p.motor.K_e * p.motor.K_tau, 0.0});
    const Vec<double> den = poly::add<double>(poly::mul<double>(delta, electrical), poly::mul<double>(emf, n31));
    return cancel_origin(TransferFunction(p.motor.K_tau * n11, den));
}

TransferFunction torque_per_pwm_tf(const SeaParams& p, const LoadParams& l)
{
    const TransferFunction g = l.locked ? output_locked_tf(p) : voltage_to_deflection_tf(p, l);
    return (p.K_s * p.V_nominal) * g;
}

std::vector<UncertaintySample> uncertainty(const TransferFunction& g_x, const TransferFunction& g_nominal,
                                           std::span<const double> omegas)
{
    std::vector<UncertaintySample> out;
    out.reserve(omegas.size());
    for (double w : omegas) {
        const std::complex<double> nominal = freq_response(g_nominal, w);
        if (std::abs(nominal) < 1e-15) {
            std::ostringstream msg;
            msg << "nominal response vanishes at omega = " << w << " rad/s";
            throw Error(Errc::singular_nominal, msg.str());
        }
        out.push_back({w, (freq_response(g_x, w) - nominal) / nominal});
    }
    return out;
}

} // namespace sea
