#include "sea/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace sea {

void PidConfig::validate() const
{
    if (!(kp >= 0.0 && ki >= 0.0 && kd >= 0.0))
        throw Error(Errc::config_rejected, "PID gains must be non-negative");
    if (!(derivative_filter_tau > 0.0))
        throw Error(Errc::config_rejected, "derivative filter time constant must be positive");
    if (output_min != -1.0 || output_max != 1.0)
        throw Error(Errc::config_rejected, "PID output clamp is the PWM range [-1, 1]");
}

double pid_step(PidState& state, double torque_ref, double torque_meas, double dt, const PidConfig& cfg)
{
    const double error = torque_ref - torque_meas;
    if (!state.primed) {
        state.prev_error = error;
        state.primed = true;
    }
    const double tau = cfg.derivative_filter_tau;
    state.derivative = (tau * state.derivative + (error - state.prev_error)) / (tau + dt);
    state.prev_error = error;

    const double candidate = state.integrator + error * dt;
    const double rest = cfg.kp * error + cfg.kd * state.derivative;
    const double unclamped = rest + cfg.ki * candidate;
    const bool pushing_high = unclamped > cfg.output_max && error > 0.0;
    const bool pushing_low = unclamped < cfg.output_min && error < 0.0;
    if (!(pushing_high || pushing_low)) {
        state.integrator = candidate;
    } else if (cfg.ki > 0.0) {
        // Integrate only up to the clamp boundary, never back away from it.
        const double edge = ((pushing_high ? cfg.output_max : cfg.output_min) - rest) / cfg.ki;
        state.integrator = pushing_high ? std::max(state.integrator, std::min(candidate, edge))
                                        : std::min(state.integrator, std::max(candidate, edge));
    }

    const double out = cfg.kp * error + cfg.ki * state.integrator + cfg.kd * state.derivative;
    return std::clamp(out, cfg.output_min, cfg.output_max);
}

TransferFunction pid_tf(const PidConfig& cfg)
{
    const double tau = cfg.derivative_filter_tau;
    // [kp s (tau s + 1) + ki (tau s + 1) + kd s^2] / [s (tau s + 1)]
    const TransferFunction c({cfg.kp * tau + cfg.kd, cfg.kp + cfg.ki * tau, cfg.ki}, {tau, 1.0, 0.0});
    return cancel_origin(c);
}

TransferFunction closed_loop_predicted_tf(const PidConfig& pid, const TransferFunction& torque_plant)
{
    const TransferFunction c = pid_tf(pid);
    if (c.is_zero())
        return TransferFunction();
    return feedback(c * torque_plant, TransferFunction::constant(1.0));
}

DobConfig DobConfig::for_plant(const SeaParams& nominal, double sample_period)
{
    DobConfig cfg;
    cfg.nominal_plant = nominal.V_nominal * output_locked_tf(nominal);
    cfg.sample_period = sample_period;
    return cfg;
}

DisturbanceObserver::DisturbanceObserver(const DobConfig& cfg)
{
    const TransferFunction& pn = cfg.nominal_plant;
    if (pn.is_zero())
        throw Error(Errc::config_rejected, "nominal plant is identically zero");
    if (cfg.q_order < 1 || !(cfg.q_cutoff > 0.0) || !(cfg.sample_period > 0.0))
        throw Error(Errc::config_rejected, "Q filter needs order >= 1, positive cutoff and sample period");
    if (cfg.q_order < pn.relative_degree()) {
        std::ostringstream msg;
        msg << "Q order " << cfg.q_order << " is below the nominal plant's relative degree " << pn.relative_degree();
        throw Error(Errc::config_rejected, msg.str());
    }
    q_ = butterworth_lowpass(cfg.q_order, cfg.q_cutoff);
    const TransferFunction inverse_path = q_ * inverse(pn);
    try {
        q_d_ = discretize(q_, cfg.sample_period);
        inverse_d_ = discretize(inverse_path, cfg.sample_period);
    } catch (const Error& e) {
        throw Error(Errc::config_rejected, std::string("observer filters not realizable: ") + e.what());
    }
    if (!q_d_.is_stable() || !inverse_d_.is_stable())
        throw Error(Errc::config_rejected, "discretized Q or Q P_n^-1 is unstable");
    q_filter_ = DiscreteFilter<double>(q_d_);
    inverse_filter_ = DiscreteFilter<double>(inverse_d_);
}

double DisturbanceObserver::step(double x_in, double theta_d_meas)
{
    // u_prev_ is the command applied over the interval that produced theta_d.
    d_hat_ = inverse_filter_.step(theta_d_meas) - q_filter_.step(u_prev_);
    return x_in - d_hat_;
}

void DisturbanceObserver::reset()
{
    q_filter_.reset();
    inverse_filter_.reset();
    u_prev_ = 0.0;
    d_hat_ = 0.0;
}

bool q_respects_uncertainty(const TransferFunction& q, std::span<const UncertaintySample> profile)
{
    return std::all_of(profile.begin(), profile.end(), [&](const UncertaintySample& s) {
        return std::abs(freq_response(q, s.omega)) * std::abs(s.delta) < 1.0;
    });
}

void ThermalRegulatorConfig::validate() const
{
    if (!(trigger_fraction > 0.0 && trigger_fraction < 1.0))
        throw Error(Errc::config_rejected, "regulator trigger fraction must lie in (0, 1)");
    if (!(min_gain >= 0.0 && min_gain < 1.0))
        throw Error(Errc::config_rejected, "regulator min_gain must lie in [0, 1)");
    if (!(filter_cutoff_min > 0.0 && filter_cutoff_min < filter_cutoff_max))
        throw Error(Errc::config_rejected, "regulator cutoffs need 0 < min < max");
}

RegulatorSchedule regulator_schedule(double T_W_est, double T_MAX, const ThermalRegulatorConfig& cfg)
{
    const double trigger = cfg.trigger_fraction * T_MAX;
    if (T_W_est < trigger)
        return {};
    const double depth = std::clamp((T_W_est - trigger) / (T_MAX - trigger), 0.0, 1.0);
    RegulatorSchedule s;
    s.active = true;
    s.gain = 1.0 - (1.0 - cfg.min_gain) * depth;
    s.cutoff_hz = cfg.filter_cutoff_max - (cfg.filter_cutoff_max - cfg.filter_cutoff_min) * depth;
    return s;
}

ThermalRegulator::ThermalRegulator(const ThermalRegulatorConfig& cfg) : cfg_(cfg)
{
    cfg_.validate();
}

double ThermalRegulator::step(double pwm_ref, double T_W_est, double T_MAX, double dt)
{
    schedule_ = regulator_schedule(T_W_est, T_MAX, cfg_);
    if (!schedule_.active) {
        engaged_ = false;
        return pwm_ref;
    }
    const double target = schedule_.gain * pwm_ref;
    if (!engaged_) {
        filtered_ = target;
        engaged_ = true;
    } else {
        const double alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * schedule_.cutoff_hz * dt);
        filtered_ += alpha * (target - filtered_);
    }
    const double limit = std::abs(target);
    return std::clamp(filtered_, -limit, limit);
}

void ThermalRegulator::reset()
{
    schedule_ = {};
    filtered_ = 0.0;
    engaged_ = false;
}

ControlStackConfig ControlStackConfig::defaults(const SeaParams& nominal, const ThermalParams& thermal,
                                                double sample_period)
{
    ControlStackConfig cfg;
    cfg.dob = DobConfig::for_plant(nominal, sample_period);
    cfg.thermal = thermal;
    cfg.K_s = nominal.K_s;
    cfg.sample_period = sample_period;
    return cfg;
}

ControlStack::ControlStack(const ControlStackConfig& cfg) : cfg_(cfg), estimator_(cfg.thermal)
{
    cfg_.pid.validate();
    if (!(cfg_.sample_period > 0.0) || !(cfg_.K_s > 0.0))
        throw Error(Errc::config_rejected, "control stack needs positive sample period and K_s");
    if (cfg_.dob) {
        if (std::abs(cfg_.dob->sample_period - cfg_.sample_period) > 1e-12 * cfg_.sample_period)
            throw Error(Errc::config_rejected, "observer and controller sample periods differ");
        dob_.emplace(*cfg_.dob);
    }
    if (cfg_.regulator)
        regulator_.emplace(*cfg_.regulator);
}

double ControlStack::step(double t, double torque_ref, double theta_d, double T_H_meas, double i_m_meas)
{
    log_.t = t;
    log_.ref = torque_ref;
    log_.meas = cfg_.K_s * theta_d;
    const double x = pid_step(pid_, torque_ref, log_.meas, cfg_.sample_period, cfg_.pid);
    return finish(x, theta_d, T_H_meas, i_m_meas);
}

double ControlStack::step_pwm(double t, double x, double theta_d, double T_H_meas, double i_m_meas)
{
    log_.t = t;
    log_.ref = x;
    log_.meas = cfg_.K_s * theta_d;
    return finish(x, theta_d, T_H_meas, i_m_meas);
}

double ControlStack::finish(double x, double theta_d, double T_H_meas, double i_m_meas)
{
    log_.x_pid = x;
    log_.T_W_est = estimator_.update(T_H_meas, i_m_meas, cfg_.sample_period);

    double u = dob_ ? dob_->step(x, theta_d) : x;
    log_.d_hat = dob_ ? dob_->disturbance_estimate() : 0.0;
    if (regulator_)
        u = regulator_->step(u, log_.T_W_est, cfg_.thermal.T_MAX, cfg_.sample_period);
    u = std::clamp(u, -1.0, 1.0);
    if (dob_)
        dob_->commit(u);
    log_.pwm_out = u;
    return u;
}

} // namespace sea
