#include "sea/sim.hpp"

#include "sea/error.hpp"
#include "sea/ode.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <sstream>

namespace sea {

namespace {

using Mech = Eigen::Matrix<double, 5, 1>;
using Heat = Eigen::Matrix<double, 5, 1>; // T_W, T_H, T_M, heat in, heat out

constexpr double two_pi = 2.0 * std::numbers::pi;

class MechanicalModel
{
public:
    MechanicalModel(const SeaParams& sea, const LoadParams& load, const SimInput& input)
        : sea_(sea), load_(load), input_(input)
    {}

    void set_voltage(double v) { voltage_ = v; }

    double decay_rate() const { return sea_.motor.R / sea_.motor.L; }

    /// Right-hand side without the -R/L i term.
    Mech nonstiff(double t, const Mech& y) const
    {
        const auto& m = sea_.motor;
        const double theta_d = y(1) / sea_.N - y(3);
        const double d_d = input_.d_d ? input_.d_d(t) : 0.0;
        const double spring = sea_.K_s * theta_d + d_d;
        Mech dy;
        dy(0) = (voltage_ - m.K_e * y(2)) / m.L;
        dy(1) = y(2);
        dy(2) = (m.K_tau * y(0) - m.B_m * y(2) - spring / sea_.N) / m.J_m;
        if (load_.locked) {
            dy(3) = 0.0;
            dy(4) = 0.0;
        } else {
            const double d_l = input_.d_l ? input_.d_l(t) : 0.0;
            dy(3) = y(4);
            dy(4) = (spring + d_l - load_.B_l * y(4)) / load_.J_l;
        }
        return dy;
    }

    Mech full(double t, const Mech& y) const
    {
        Mech dy = nonstiff(t, y);
        dy(0) -= decay_rate() * y(0);
        return dy;
    }

    /// Integrating-factor (Lawson) RK4 with exact exponential current decay.
    Mech lawson_step(double t, const Mech& y, double h) const
    {
        const double e_full = std::exp(-decay_rate() * h);
        const double e_half = std::exp(-0.5 * decay_rate() * h);
        auto scale = [](Mech v, double e) {
            v(0) *= e;
            return v;
        };
        const Mech k1 = nonstiff(t, y);
        const Mech k2 = nonstiff(t + 0.5 * h, scale(y + 0.5 * h * k1, e_half));
        const Mech k3 = nonstiff(t + 0.5 * h, Mech(scale(y, e_half) + 0.5 * h * k2));
        const Mech k4 = nonstiff(t + h, Mech(scale(y, e_full) + h * scale(k3, e_half)));
        return scale(y, e_full) + (h / 6.0) * (scale(k1, e_full) + 2.0 * scale(Mech(k2 + k3), e_half) + k4);
    }

    Mech rk4(double t, const Mech& y, double h) const
    {
        return rk4_step([this](double tt, const Mech& x) { return full(tt, x); }, t, y, h);
    }

private:
    const SeaParams& sea_;
    const LoadParams& load_;
    const SimInput& input_;
    double voltage_ = 0.0;
};

Heat thermal_step_accounted(const Heat& x, double i_m_sq, double h, const ThermalParams& p)
{
    auto rhs = [&](double, const Heat& s) {
        const ThermalState state{s(0), s(1), s(2)};
        const ThermalState d = thermal_derivatives_ms(state, i_m_sq, p);
        Heat out;
        out << d.T_W, d.T_H, d.T_M, joule_power(1.0, state.T_W, p) * i_m_sq + p.i_source,
            (state.T_M - p.T_A) / p.R3;
        return out;
    };
    return rk4_step(rhs, 0.0, x, h);
}

std::string at_time(double t)
{
    std::ostringstream msg;
    msg << "simulation diverged (non-finite state) at t = " << t << " s";
    return msg.str();
}

} // namespace

int SimConfig::substeps() const
{
    return static_cast<int>(std::lround(control_dt / dt));
}

void SimConfig::validate(const SeaParams& sea) const
{
    if (!(dt > 0.0) || !(control_dt >= dt) || !(duration >= 0.0))
        throw Error(Errc::invalid_argument, "simulation needs dt > 0, control_dt >= dt and duration >= 0");
    const int n = substeps();
    if (std::abs(n * dt - control_dt) > 1e-9 * control_dt)
        throw Error(Errc::invalid_argument, "control_dt must be an integer multiple of dt");
    if (thermal_decimation < 1)
        throw Error(Errc::invalid_argument, "thermal_decimation must be at least 1");
    if (electrical == ElectricalStep::rk4 && dt > sea.motor.L / sea.motor.R / 10.0)
        throw Error(Errc::invalid_argument, "plain RK4 needs dt <= L/(10 R) to resolve the electrical pole");
}

SimOutcome integrate_coupled(const SeaParams& sea, const LoadParams& load, const ThermalParams& thermal,
                             ControlStack* controller, const SimInput& input, const SimConfig& cfg,
                             const SimInitial& initial, const SampleObserver& observer)
{
    sea.validate();
    load.validate();
    thermal.validate();
    cfg.validate(sea);
    if (input.mode != DriveMode::pwm && controller == nullptr)
        throw Error(Errc::invalid_argument, "closed-loop drive modes need a control stack");

    MechanicalModel model(sea, load, input);
    Mech y;
    y << initial.i_m, 0.0, initial.omega_m, 0.0, 0.0;
    const ThermalState start = initial.thermal.value_or(ThermalState::ambient(thermal));
    Heat heat;
    heat << start.T_W, start.T_H, start.T_M, 0.0, 0.0;

    const int n_sub = cfg.substeps();
    const long periods = std::lround(cfg.duration / cfg.control_dt);
    const double thermal_h = cfg.thermal_decimation * cfg.dt;
    double i_sq_acc = 0.0;
    int thermal_count = 0;

    SimOutcome outcome;
    outcome.end_time = static_cast<double>(periods) * cfg.control_dt;
    SimSample sample;
    for (long k = 0; k < periods; ++k) {
        const double t = static_cast<double>(k) * cfg.control_dt;
        sample.t = t;
        sample.i_m = y(0);
        sample.theta_m = y(1);
        sample.omega_m = y(2);
        sample.theta_l = y(3);
        sample.omega_l = y(4);
        sample.theta_d = y(1) / sea.N - y(3);
        sample.torque = sea.K_s * sample.theta_d;
        sample.thermal = {heat(0), heat(1), heat(2)};

        if (cfg.halt_at_t_max && sample.thermal.T_W >= thermal.T_MAX) {
            outcome.halted = true;
            outcome.halt_time = t;
            outcome.end_time = t;
            break;
        }

        sample.command = input.command ? input.command(t) : 0.0;
        switch (input.mode) {
        case DriveMode::pwm:
            sample.pwm = std::clamp(sample.command, -1.0, 1.0);
            break;
        case DriveMode::torque_reference:
            sample.pwm = controller->step(t, sample.command, sample.theta_d, sample.thermal.T_H, sample.i_m);
            sample.control = controller->last();
            break;
        case DriveMode::controlled_pwm:
            sample.pwm = controller->step_pwm(t, sample.command, sample.theta_d, sample.thermal.T_H, sample.i_m);
            sample.control = controller->last();
            break;
        }
        if (observer)
            observer(sample);

        model.set_voltage(sample.pwm * sea.V_nominal);
        for (int j = 0; j < n_sub; ++j) {
            const double ts = t + j * cfg.dt;
            const double i_before = y(0);
            y = cfg.electrical == ElectricalStep::exponential ? model.lawson_step(ts, y, cfg.dt)
                                                               : model.rk4(ts, y, cfg.dt);
            i_sq_acc += 0.5 * (i_before * i_before + y(0) * y(0));
            if (++thermal_count == cfg.thermal_decimation) {
                heat = thermal_step_accounted(heat, i_sq_acc / cfg.thermal_decimation, thermal_h, thermal);
                i_sq_acc = 0.0;
                thermal_count = 0;
            }
        }
        if (!y.allFinite() || !heat.allFinite())
            throw Error(Errc::divergence, at_time(t + cfg.control_dt));
    }

    outcome.mechanical = y;
    outcome.thermal = {heat(0), heat(1), heat(2)};
    outcome.heat_in = heat(3);
    outcome.heat_out = heat(4);
    return outcome;
}

SimTrace simulate(const SeaParams& sea, const LoadParams& load, const ThermalParams& thermal,
                  ControlStack* controller, const SimInput& input, const SimConfig& cfg, const SimInitial& initial)
{
    SimTrace trace;
    trace.samples.reserve(static_cast<std::size_t>(std::max(0L, std::lround(cfg.duration / cfg.control_dt))));
    trace.outcome = integrate_coupled(sea, load, thermal, controller, input, cfg, initial,
                                      [&](const SimSample& s) { trace.samples.push_back(s); });
    return trace;
}

double ChirpSpec::phase(double t) const
{
    return two_pi * (f_start * t + 0.5 * sweep_rate * t * t);
}

double ChirpSpec::value(double t) const
{
    return amplitude * std::sin(phase(t));
}

double ChirpSpec::time_at_phase(double phase) const
{
    const double cycles = phase / two_pi;
    return 2.0 * cycles / (f_start + std::sqrt(f_start * f_start + 2.0 * sweep_rate * cycles));
}

void ChirpSpec::validate() const
{
    if (!(amplitude > 0.0))
        throw Error(Errc::invalid_argument, "chirp amplitude must be positive");
    if (!(f_start > 0.0 && f_start < f_end))
        throw Error(Errc::invalid_argument, "chirp needs 0 < f_start < f_end");
    if (!(sweep_rate > 0.0))
        throw Error(Errc::invalid_argument, "chirp sweep rate must be positive");
}

std::optional<CycleEnvelope> EnvelopeTracker::push(double t, double value)
{
    const long cycle = static_cast<long>(std::floor(chirp_.phase(t) / two_pi));
    if (cycle_ < 0 && values_.empty()) {
        // A stream that starts mid-cycle cannot measure that cycle.
        const double fraction = chirp_.phase(t) / two_pi - static_cast<double>(cycle);
        cycle_ = fraction < 1e-6 ? cycle : -1 - cycle;
        values_.push_back(value);
        return std::nullopt;
    }
    if (cycle_ < 0 && cycle != -1 - cycle_) {
        cycle_ = cycle;
        values_.assign(1, value);
        return std::nullopt;
    }
    if (cycle_ >= 0 && cycle != cycle_) {
        values_.push_back(value); // trailing neighbour for the refinement
        const CycleEnvelope env = close_cycle();
        values_.assign(1, value);
        cycle_ = cycle;
        return env;
    }
    values_.push_back(value);
    return std::nullopt;
}

CycleEnvelope EnvelopeTracker::close_cycle() const
{
    // values_ holds the cycle followed by one trailing neighbour.
    const std::size_t n = values_.size() - 1;
    auto refine = [&](std::size_t i) {
        if (i == 0 || i + 1 >= values_.size())
            return values_[i];
        const double ym = values_[i - 1], y0 = values_[i], yp = values_[i + 1];
        const double curvature = ym - 2.0 * y0 + yp;
        if (curvature == 0.0)
            return y0;
        const double offset = 0.5 * (ym - yp) / curvature;
        return y0 - 0.25 * (ym - yp) * offset;
    };
    std::size_t i_max = 0, i_min = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (values_[i] > values_[i_max])
            i_max = i;
        if (values_[i] < values_[i_min])
            i_min = i;
    }
    CycleEnvelope env;
    env.magnitude = 0.5 * (refine(i_max) - refine(i_min));
    env.t_begin = chirp_.time_at_phase(two_pi * static_cast<double>(cycle_));
    env.t_end = chirp_.time_at_phase(two_pi * static_cast<double>(cycle_ + 1));
    env.freq_hz = chirp_.frequency(chirp_.time_at_phase(two_pi * (static_cast<double>(cycle_) + 0.5)));
    return env;
}

Envelope extract_envelope(const TimeSeries& trace, const ChirpSpec& chirp)
{
    if (trace.t.size() != trace.value.size())
        throw Error(Errc::invalid_argument, "time and value columns differ in length");
    EnvelopeTracker tracker(chirp);
    Envelope out;
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
        if (auto env = tracker.push(trace.t[i], trace.value[i])) {
            out.freq_hz.push_back(env->freq_hz);
            out.magnitude.push_back(env->magnitude);
        }
    }
    if (out.freq_hz.empty())
        throw Error(Errc::insufficient_data, "trace is shorter than one chirp cycle");
    return out;
}

double accessible_bandwidth(std::optional<double> bandwidth_3db, std::optional<double> thermal_limit_freq)
{
    if (!bandwidth_3db && !thermal_limit_freq)
        throw Error(Errc::indeterminate, "neither a -3 dB point nor a thermal limit lies within the sweep");
    const double inf = std::numeric_limits<double>::infinity();
    return std::min(bandwidth_3db.value_or(inf), thermal_limit_freq.value_or(inf));
}

double accessible_bandwidth(const SweepResult& result)
{
    return accessible_bandwidth(result.bandwidth_3db, result.thermal_limit_freq);
}

std::optional<double> gain_curve_bandwidth(std::span<const double> freq, std::span<const double> gain,
                                           double reference_gain)
{
    const double level = reference_gain / std::sqrt(2.0);
    for (std::size_t j = 0; j < gain.size() && j < freq.size(); ++j) {
        if (gain[j] < level) {
            if (j == 0)
                return freq[0];
            const double w = (gain[j - 1] - level) / (gain[j - 1] - gain[j]);
            return freq[j - 1] + w * (freq[j] - freq[j - 1]);
        }
    }
    return std::nullopt;
}

namespace {

SweepResult run_sweep(SweepMode mode, const SeaParams& sea, const LoadParams& load, const ThermalParams& thermal,
                      ControlStack* stack, const ChirpSpec& chirp, const SimConfig& cfg,
                      const SampleObserver& observer)
{
    chirp.validate();
    SimConfig run_cfg = cfg;
    run_cfg.duration = chirp.duration();

    SimInput input;
    input.mode = mode == SweepMode::open_loop ? DriveMode::pwm : DriveMode::torque_reference;
    input.command = [chirp](double t) { return chirp.value(t); };

    SweepResult result;
    result.mode = mode;
    result.chirp = chirp;

    EnvelopeTracker tracker(chirp);
    std::deque<std::pair<double, double>> recent;
    double tw_max = -std::numeric_limits<double>::infinity();
    double th_last = thermal.T_A;
    double pwm_sq = 0.0;
    long pwm_count = 0;

    auto record = [&](double freq, double magnitude, double tw, double th) {
        result.freq_grid.push_back(freq);
        result.torque_magnitude.push_back(magnitude);
        result.gain.push_back(magnitude / chirp.amplitude);
        result.winding_temp.push_back(tw);
        result.housing_temp.push_back(th);
        result.pwm_rms.push_back(pwm_count > 0 ? std::sqrt(pwm_sq / static_cast<double>(pwm_count)) : 0.0);
    };

    auto on_sample = [&](const SimSample& s) {
        if (observer)
            observer(s);
        recent.emplace_back(s.t, s.torque);
        const double window = 1.0 / chirp.frequency(s.t);
        while (!recent.empty() && recent.front().first < s.t - window)
            recent.pop_front();
        if (auto env = tracker.push(s.t, s.torque)) {
            record(env->freq_hz, env->magnitude, tw_max, th_last);
            tw_max = -std::numeric_limits<double>::infinity();
            pwm_sq = 0.0;
            pwm_count = 0;
        }
        tw_max = std::max(tw_max, s.thermal.T_W);
        th_last = s.thermal.T_H;
        pwm_sq += s.pwm * s.pwm;
        ++pwm_count;
    };

    result.outcome = integrate_coupled(sea, load, thermal, stack, input, run_cfg, {}, on_sample);

    if (result.outcome.halted) {
        const double t_halt = *result.outcome.halt_time;
        result.terminated_early = true;
        result.thermal_limit_freq = chirp.frequency(t_halt);
        double hi = -std::numeric_limits<double>::infinity(), lo = -hi;
        for (const auto& [t, torque] : recent) {
            hi = std::max(hi, torque);
            lo = std::min(lo, torque);
        }
        const double magnitude = recent.empty() ? 0.0 : 0.5 * (hi - lo);
        record(*result.thermal_limit_freq, magnitude, result.outcome.thermal.T_W, result.outcome.thermal.T_H);
    }

    if (mode == SweepMode::closed_loop) {
        result.reference_gain = 1.0;
    } else if (!result.gain.empty()) {
        std::vector<double> head(result.gain.begin(), result.gain.begin() + std::min<std::size_t>(3, result.gain.size()));
        std::sort(head.begin(), head.end());
        result.reference_gain = head[head.size() / 2];
    }
    result.bandwidth_3db = gain_curve_bandwidth(result.freq_grid, result.gain, result.reference_gain);
    if (result.bandwidth_3db || result.thermal_limit_freq)
        result.accessible_bandwidth = accessible_bandwidth(result.bandwidth_3db, result.thermal_limit_freq);
    return result;
}

} // namespace

SweepResult run_open_loop_sweep(const SeaParams& sea, const LoadParams& load, const ThermalParams& thermal,
                                const ChirpSpec& chirp, const SimConfig& cfg, const SampleObserver& observer)
{
    if (!(chirp.amplitude > 0.0 && chirp.amplitude <= 1.0))
        throw Error(Errc::invalid_argument, "open-loop PWM amplitude must lie in (0, 1]");
    return run_sweep(SweepMode::open_loop, sea, load, thermal, nullptr, chirp, cfg, observer);
}

SweepResult run_closed_loop_sweep(const SeaParams& sea, const ThermalParams& thermal,
                                  const ControlStackConfig& stack_cfg, const ChirpSpec& chirp, const SimConfig& cfg,
                                  const SampleObserver& observer)
{
    if (std::abs(stack_cfg.sample_period - cfg.control_dt) > 1e-12 * cfg.control_dt)
        throw Error(Errc::invalid_argument, "control stack sample period must equal the simulation control_dt");
    ControlStack stack(stack_cfg);
    return run_sweep(SweepMode::closed_loop, sea, LoadParams::locked_output(), thermal, &stack, chirp, cfg,
                     observer);
}

std::vector<SweepResult> run_sweep_batch(std::span<const std::function<SweepResult()>> jobs)
{
    std::vector<std::future<SweepResult>> pending;
    pending.reserve(jobs.size());
    for (const auto& job : jobs)
        pending.push_back(std::async(std::launch::async, job));
    std::vector<SweepResult> out;
    out.reserve(jobs.size());
    for (auto& f : pending)
        out.push_back(f.get());
    return out;
}

} // namespace sea
