#pragma once

// Coupled electromechanical + thermal time-domain simulation and the chirp
// sweep experiments built on it.
//
// The electromechanical state (i_m, theta_m, omega_m, theta_l, omega_l) is
// advanced with an integrating-factor RK4: the stiff -R/L current decay is
// applied exactly through exp(-R h / L) and everything else goes through the
// classical RK4 stages. The thermal network is stepped with RK4 every
// thermal_decimation mechanical steps using the mean square current over
// that window.

#include "sea/control.hpp"
#include "sea/electromech.hpp"
#include "sea/thermo.hpp"

#include <Eigen/Core>

#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace sea {

enum class ElectricalStep { exponential, rk4 };

struct SimConfig
{
    double dt = 1e-4;         // mechanical integration step, s
    double control_dt = 1e-3; // controller / logging period, s
    double duration = 10.0;
    int thermal_decimation = 10;
    ElectricalStep electrical = ElectricalStep::exponential;
    bool halt_at_t_max = true;

    int substeps() const;
    void validate(const SeaParams& sea) const;
};

enum class DriveMode {
    pwm,              // command is the PWM applied directly
    torque_reference, // command is a torque reference for the control stack
    controlled_pwm,   // command is x fed to the stack with the PID bypassed
};

using Signal = std::function<double(double)>;

struct SimInput
{
    DriveMode mode = DriveMode::pwm;
    Signal command;
    Signal d_d; // N m, injected at the spring
    Signal d_l; // N m, injected at the load
};

struct SimInitial
{
    double i_m = 0.0;
    double omega_m = 0.0;
    std::optional<ThermalState> thermal; // ambient when empty
};

struct SimSample
{
    double t = 0.0;
    double i_m = 0.0;
    double theta_m = 0.0;
    double omega_m = 0.0;
    double theta_l = 0.0;
    double omega_l = 0.0;
    double theta_d = 0.0;
    double torque = 0.0;
    double command = 0.0;
    double pwm = 0.0;
    ThermalState thermal;
    ControlLog control;
};

struct SimOutcome
{
    double end_time = 0.0;
    bool halted = false;
    std::optional<double> halt_time;
    Eigen::Matrix<double, 5, 1> mechanical = Eigen::Matrix<double, 5, 1>::Zero();
    ThermalState thermal;
    double heat_in = 0.0;  // J, Joule + electronics heat integrated
    double heat_out = 0.0; // J, heat delivered to ambient through R3
};

using SampleObserver = std::function<void(const SimSample&)>;

/// Runs the coupled model for cfg.duration. The observer sees one sample per
/// control period (state at the start of the period and the PWM applied over
/// it). Stops early when T_W reaches T_MAX if cfg.halt_at_t_max is set.
/// Throws Errc::divergence on a non-finite state.
SimOutcome integrate_coupled(const SeaParams& sea, const LoadParams& load, const ThermalParams& thermal,
                             ControlStack* controller, const SimInput& input, const SimConfig& cfg,
                             const SimInitial& initial = {}, const SampleObserver& observer = {});

struct SimTrace
{
    std::vector<SimSample> samples;
    SimOutcome outcome;
};

SimTrace simulate(const SeaParams& sea, const LoadParams& load, const ThermalParams& thermal,
                  ControlStack* controller, const SimInput& input, const SimConfig& cfg,
                  const SimInitial& initial = {});

/// Linear chirp with phase 2 pi (f_start t + sweep_rate t^2 / 2).
struct ChirpSpec
{
    double amplitude = 0.2; // PWM (open loop) or N m (closed loop)
    double f_start = 0.5;
    double f_end = 20.0;
    double sweep_rate = 0.02; // Hz/s

    double duration() const { return (f_end - f_start) / sweep_rate; }
    double phase(double t) const;
    double frequency(double t) const { return f_start + sweep_rate * t; }
    double value(double t) const;
    double time_at_phase(double phase) const;

    void validate() const;
};

struct CycleEnvelope
{
    double freq_hz;
    double magnitude;
    double t_begin;
    double t_end;
};

/// Online per-cycle peak detector keyed to the chirp phase. One magnitude
/// per completed cycle: half the peak-to-peak swing, with the extrema refined
/// by parabolic interpolation on their neighbours.
class EnvelopeTracker
{
public:
    explicit EnvelopeTracker(const ChirpSpec& chirp) : chirp_(chirp) {}

    /// Returns the envelope of the cycle that this sample closed, if any.
    std::optional<CycleEnvelope> push(double t, double value);

private:
    CycleEnvelope close_cycle() const;

    ChirpSpec chirp_;
    long cycle_ = -1;
    std::vector<double> values_;
};

struct TimeSeries
{
    std::vector<double> t;
    std::vector<double> value;
};

struct Envelope
{
    std::vector<double> freq_hz;
    std::vector<double> magnitude;
};

/// Throws Errc::insufficient_data when the trace does not cover one cycle.
Envelope extract_envelope(const TimeSeries& trace, const ChirpSpec& chirp);

enum class SweepMode { open_loop, closed_loop };

struct SweepResult
{
    SweepMode mode = SweepMode::open_loop;
    ChirpSpec chirp;
    std::vector<double> freq_grid;
    std::vector<double> torque_magnitude;
    std::vector<double> gain;
    std::vector<double> winding_temp;
    std::vector<double> housing_temp;
    std::vector<double> pwm_rms;
    double reference_gain = 1.0;
    std::optional<double> thermal_limit_freq;
    std::optional<double> bandwidth_3db;
    std::optional<double> accessible_bandwidth;
    bool terminated_early = false;
    SimOutcome outcome;
};

/// min(bandwidth, thermal limit) with a missing bound treated as +inf.
/// Throws Errc::indeterminate when both are missing.
double accessible_bandwidth(std::optional<double> bandwidth_3db, std::optional<double> thermal_limit_freq);
double accessible_bandwidth(const SweepResult& result);

/// Lowest frequency where the gain curve drops below reference/sqrt(2),
/// linearly interpolated between samples.
std::optional<double> gain_curve_bandwidth(std::span<const double> freq, std::span<const double> gain,
                                           double reference_gain);

SweepResult run_open_loop_sweep(const SeaParams& sea, const LoadParams& load, const ThermalParams& thermal,
                                const ChirpSpec& chirp, const SimConfig& cfg, const SampleObserver& observer = {});

/// Torque-reference chirp through the control stack, output locked.
SweepResult run_closed_loop_sweep(const SeaParams& sea, const ThermalParams& thermal,
                                  const ControlStackConfig& stack, const ChirpSpec& chirp, const SimConfig& cfg,
                                  const SampleObserver& observer = {});

/// Runs independent sweeps concurrently; results keep the job order.
std::vector<SweepResult> run_sweep_batch(std::span<const std::function<SweepResult()>> jobs);

} // namespace sea
