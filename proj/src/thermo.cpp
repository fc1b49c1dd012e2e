#include "sea/thermo.hpp"

#include "sea/error.hpp"
#include "sea/ode.hpp"

#include <cmath>
#include <sstream>

namespace sea {

void ThermalParams::validate() const
{
    for (double v : {R1, R2, R3, tau1, tau2, tau3, R_A}) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw Error(Errc::invalid_argument, "thermal resistances, time constants and R_A must be positive");
    }
    if (!(tau1 < tau2))
        throw Error(Errc::invalid_argument, "winding time constant tau1 must be below tau2");
    if (!(T_MAX > T_A))
        throw Error(Errc::invalid_argument, "T_MAX must exceed the ambient temperature");
    if (!std::isfinite(alpha_cu) || alpha_cu < 0.0)
        throw Error(Errc::invalid_argument, "alpha_cu must be finite and non-negative");
    if (!std::isfinite(i_source) || i_source < 0.0)
        throw Error(Errc::invalid_argument, "i_source must be finite and non-negative");
}

double joule_power(double i_m, double T_W, const ThermalParams& p)
{
    return p.R_A * (1.0 + p.alpha_cu * (T_W - p.T_A)) * i_m * i_m;
}

ThermalState thermal_derivatives_ms(const ThermalState& s, double i_m_sq, const ThermalParams& p)
{
    const double p_joule = p.R_A * (1.0 + p.alpha_cu * (s.T_W - p.T_A)) * i_m_sq;
    const double q_wh = (s.T_W - s.T_H) / p.R1;
    const double q_hm = (s.T_H - s.T_M) / p.R2;
    const double q_ma = (s.T_M - p.T_A) / p.R3;
    return {(p_joule - q_wh) / p.C1(), (q_wh - q_hm) / p.C2(), (q_hm + p.i_source - q_ma) / p.C3()};
}

ThermalState thermal_derivatives(const ThermalState& s, double i_m, const ThermalParams& p)
{
    return thermal_derivatives_ms(s, i_m * i_m, p);
}

ThermalState thermal_step(const ThermalState& s, double i_m_sq, double dt, const ThermalParams& p)
{
    auto rhs = [&](double, const Eigen::Vector3d& x) {
        return thermal_derivatives_ms(ThermalState::from(x), i_m_sq, p).vec();
    };
    return ThermalState::from(rk4_step(rhs, 0.0, s.vec(), dt));
}

double stored_energy(const ThermalState& s, const ThermalParams& p)
{
    return p.C1() * (s.T_W - p.T_A) + p.C2() * (s.T_H - p.T_A) + p.C3() * (s.T_M - p.T_A);
}

double steady_state_winding_temp(double i_m, const ThermalParams& p)
{
    const double loss = i_m * i_m * p.R_A * p.R_total();
    const double denominator = 1.0 - p.alpha_cu * loss;
    if (!(denominator > 0.0)) {
        std::ostringstream msg;
        msg << "no steady state at " << i_m << " A: resistance growth outpaces dissipation (thermal runaway)";
        throw Error(Errc::thermal_runaway, msg.str());
    }
    return p.T_A + (loss + p.i_source * p.R3) / denominator;
}

double nominal_current(const ThermalParams& p)
{
    // T_MAX - T_A = (i^2 K + i_s R3) / (1 - alpha i^2 K) with K = R_A sum(R)
    // solves to i^2 = (dT - i_s R3) / (K (1 + alpha dT)).
    const double dT = p.T_MAX - p.T_A;
    const double headroom = dT - p.i_source * p.R3;
    if (!(headroom > 0.0))
        throw Error(Errc::zero_headroom, "electronics heat alone drives the winding to T_MAX");
    return std::sqrt(headroom / (p.R_A * p.R_total() * (1.0 + p.alpha_cu * dT)));
}

std::optional<double> on_time(double K_o, double tau1)
{
    if (!(K_o > 1.0))
        return std::nullopt;
    const double k2 = K_o * K_o;
    return tau1 * std::log(k2 / (k2 - 1.0));
}

OverloadBudget overload_budget(double i_O, double T_H_initial, const ThermalParams& p)
{
    if (!(T_H_initial < p.T_MAX))
        throw Error(Errc::no_overload_headroom, "housing is already at or above T_MAX");
    const double i_n = nominal_current(p);
    OverloadBudget out;
    out.K_o = std::abs(i_O) / i_n *
              std::sqrt((p.T_MAX - p.T_A) * p.R1 / ((p.T_MAX - T_H_initial) * p.R_total()));
    // The on-time formula is the crossing time of T_MAX for a transient that
    // settles at T_H + K_o^2 (T_MAX - T_H).
    out.t_beta = T_H_initial + out.K_o * out.K_o * (p.T_MAX - T_H_initial);
    out.t_on = on_time(out.K_o, p.tau1);
    const double short_term_bound = 5.0 * p.tau1;
    if (out.t_on && *out.t_on > short_term_bound) {
        out.t_on = short_term_bound;
        out.capped = true;
    }
    return out;
}

double overload_transient(double T_H, double T_beta, double t, const ThermalParams& p)
{
    if (!(t >= 0.0))
        throw Error(Errc::invalid_argument, "time must be non-negative");
    return T_H + (T_beta - T_H) * (1.0 - std::exp(-t / p.tau1));
}

double estimate_winding_temp(const WindingEstimate& prev, double T_H_now, double i_m_now, double dt,
                             const ThermalParams& p)
{
    if (!(dt > 0.0))
        throw Error(Errc::invalid_argument, "estimator step must be positive");
    if (dt > p.tau1 / 5.0) {
        std::ostringstream msg;
        msg << "estimator step " << dt << " s is too coarse for tau1 = " << p.tau1 << " s";
        throw Error(Errc::sampling_inadequate, msg.str());
    }
    const double decay = std::exp(-dt / p.tau1);
    const double rise = (prev.T_W - prev.T_H) * decay + p.R1 * (1.0 - decay) * joule_power(i_m_now, prev.T_W, p);
    return T_H_now + rise;
}

WindingTempEstimator::WindingTempEstimator(const ThermalParams& p)
    : WindingTempEstimator(p, p.T_A, p.T_A)
{}

WindingTempEstimator::WindingTempEstimator(const ThermalParams& p, double T_W0, double T_H0)
    : params_(p), estimate_{T_W0, T_H0}
{
    params_.validate();
}

double WindingTempEstimator::update(double T_H_measured, double i_m, double dt)
{
    estimate_.T_W = estimate_winding_temp(estimate_, T_H_measured, i_m, dt, params_);
    estimate_.T_H = T_H_measured;
    return estimate_.T_W;
}

double WindingTempEstimator::update(double i_m, double dt)
{
    // Housing over ambient relaxes with tau2 toward P (R2 + R3) + i_s R3.
    const double p_joule = joule_power(i_m, estimate_.T_W, params_);
    const double decay = std::exp(-dt / params_.tau2);
    const double target = p_joule * (params_.R2 + params_.R3) + params_.i_source * params_.R3;
    const double housing = params_.T_A + (estimate_.T_H - params_.T_A) * decay + (1.0 - decay) * target;
    return update(housing, i_m, dt);
}

} // namespace sea
