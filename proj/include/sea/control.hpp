#pragma once

// Discrete-time control stack: PID torque controller, open-loop disturbance
// observer wrapped around the plant only, and the winding-temperature driven
// PWM regulator. Per sample the order is
//   PID -> DOB -> thermal regulator -> saturation -> plant
// and the observer is told what was finally applied, so throttling and
// clamping are not mistaken for disturbances.

#include "sea/electromech.hpp"
#include "sea/lti.hpp"
#include "sea/thermo.hpp"

#include <optional>
#include <span>

namespace sea {

struct PidConfig
{
    // Tuned on the default output-locked plant for an 8 Hz crossover with 60
    // degrees of phase margin (integral time 4x derivative time).
    double kp = 0.12359;   // PWM per N m
    double ki = 2.9607;    // PWM per N m s
    double kd = 1.2899e-3; // PWM s per N m
    double derivative_filter_tau = 1.5915e-3; // s, 100 Hz roll-off
    double output_min = -1.0;
    double output_max = 1.0;

    void validate() const;
};

struct PidState
{
    double integrator = 0.0;
    double prev_error = 0.0;
    double derivative = 0.0;
    bool primed = false;
};

/// Clamped PID with a first-order filtered derivative and conditional
/// integration: the integrator holds while the output is clamped and the
/// error pushes further into the clamp.
double pid_step(PidState& state, double torque_ref, double torque_meas, double dt, const PidConfig& cfg);

/// kp + ki/s + kd s / (tau_f s + 1).
TransferFunction pid_tf(const PidConfig& cfg);

/// Unity-feedback C P / (1 + C P) for a torque-per-PWM plant.
TransferFunction closed_loop_predicted_tf(const PidConfig& pid, const TransferFunction& torque_plant);

struct DobConfig
{
    TransferFunction nominal_plant; // theta_d per PWM unit
    int q_order = 3;
    double q_cutoff = 80.0; // rad/s
    double sample_period = 1e-3;

    static DobConfig for_plant(const SeaParams& nominal, double sample_period = 1e-3);
};

/// Open-loop observer: d_hat = Q (P_n^-1 theta_d - u_applied), u = x - d_hat.
class DisturbanceObserver
{
public:
    explicit DisturbanceObserver(const DobConfig& cfg);

    /// Returns the compensated command for this sample.
    double step(double x_in, double theta_d_meas);

    /// Records the command that actually reached the plant this sample.
    void commit(double u_applied) { u_prev_ = u_applied; }

    void reset();

    double disturbance_estimate() const { return d_hat_; }
    const TransferFunction& q_filter() const { return q_; }
    const DiscreteTransferFunction& q_discrete() const { return q_d_; }
    const DiscreteTransferFunction& inverse_discrete() const { return inverse_d_; }

private:
    TransferFunction q_;
    DiscreteTransferFunction q_d_;
    DiscreteTransferFunction inverse_d_;
    DiscreteFilter<double> q_filter_;
    DiscreteFilter<double> inverse_filter_;
    double u_prev_ = 0.0;
    double d_hat_ = 0.0;
};

/// True when |Q(jw) Delta(jw)| < 1 on every sample of the uncertainty profile.
bool q_respects_uncertainty(const TransferFunction& q, std::span<const UncertaintySample> profile);

struct ThermalRegulatorConfig
{
    double trigger_fraction = 0.95;
    double min_gain = 0.6;
    double filter_cutoff_max = 40.0; // Hz at the trigger
    double filter_cutoff_min = 15.0; // Hz at T_MAX

    void validate() const;
};

struct RegulatorSchedule
{
    bool active = false;
    double gain = 1.0;
    double cutoff_hz = 0.0;
};

/// Linear schedule over [trigger_fraction T_MAX, T_MAX]: gain ramps 1 ->
/// min_gain and the low-pass cutoff slides filter_cutoff_max -> min.
RegulatorSchedule regulator_schedule(double T_W_est, double T_MAX, const ThermalRegulatorConfig& cfg);

class ThermalRegulator
{
public:
    explicit ThermalRegulator(const ThermalRegulatorConfig& cfg);

    /// Identity below the trigger. Above it the command is scaled, low-pass
    /// filtered and limited to the scaled command's magnitude.
    double step(double pwm_ref, double T_W_est, double T_MAX, double dt);

    const RegulatorSchedule& schedule() const { return schedule_; }
    void reset();

private:
    ThermalRegulatorConfig cfg_;
    RegulatorSchedule schedule_;
    double filtered_ = 0.0;
    bool engaged_ = false;
};

struct ControlStackConfig
{
    PidConfig pid;
    std::optional<DobConfig> dob;
    std::optional<ThermalRegulatorConfig> regulator;
    ThermalParams thermal; // estimator model and T_MAX
    double K_s = 130.0;
    double sample_period = 1e-3;

    /// PID + DOB built on the nominal parameters, regulator off.
    static ControlStackConfig defaults(const SeaParams& nominal, const ThermalParams& thermal,
                                       double sample_period = 1e-3);
};

struct ControlLog
{
    double t = 0.0;
    double ref = 0.0;
    double meas = 0.0;
    double x_pid = 0.0;
    double d_hat = 0.0;
    double pwm_out = 0.0;
    double T_W_est = 0.0;
};

class ControlStack
{
public:
    explicit ControlStack(const ControlStackConfig& cfg);

    /// Torque tracking sample: reference in N m, deflection in rad.
    double step(double t, double torque_ref, double theta_d, double T_H_meas, double i_m_meas);

    /// Bypasses the PID and feeds x straight into the observer chain.
    double step_pwm(double t, double x, double theta_d, double T_H_meas, double i_m_meas);

    const ControlLog& last() const { return log_; }
    const ControlStackConfig& config() const { return cfg_; }
    double winding_estimate() const { return estimator_.winding_temp(); }

private:
    double finish(double x, double theta_d, double T_H_meas, double i_m_meas);

    ControlStackConfig cfg_;
    PidState pid_;
    std::optional<DisturbanceObserver> dob_;
    std::optional<ThermalRegulator> regulator_;
    WindingTempEstimator estimator_;
    ControlLog log_;
};

} // namespace sea
