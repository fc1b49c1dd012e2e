// seactl: sweeps, thermal calculators and identification on the SEA model.
//
// Exit codes: 0 ok, 2 configuration or input error, 3 numerical divergence,
// 4 thermal runaway / no headroom / sweep ended at T_MAX, 5 ill-posed fit.

#include "sea/error.hpp"
#include "sea/io.hpp"
#include "sea/sim.hpp"
#include "sea/sysid.hpp"
#include "sea/thermo.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace sea;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_divergence = 3;
constexpr int exit_thermal = 4;
constexpr int exit_fit = 5;

int exit_code(Errc code)
{
    switch (code) {
    case Errc::divergence:
        return exit_divergence;
    case Errc::thermal_runaway:
    case Errc::zero_headroom:
    case Errc::no_overload_headroom:
        return exit_thermal;
    case Errc::ill_posed_fit:
    case Errc::insufficient_data:
    case Errc::singular_nominal:
        return exit_fit;
    default:
        return exit_config;
    }
}

struct ConfigOptions
{
    std::string path;
    std::vector<std::string> sets;

    void add_to(CLI::App* app)
    {
        app->add_option("--config", path, "JSON configuration file (flat dotted keys)");
        app->add_option("--set", sets, "Override one key, e.g. --set thermal.T_A=40")->take_all();
    }

    Config resolve() const
    {
        Config cfg = path.empty() ? Config{} : load_config(path);
        for (const std::string& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw Error(Errc::config_rejected, "--set expects key=value, got '" + s + "'");
            apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        return cfg;
    }
};

fs::path output_dir(const std::string& flag)
{
    if (!flag.empty())
        return flag;
    if (const char* env = std::getenv("SEA_OUTPUT_DIR"); env && *env)
        return env;
    return ".";
}

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void apply_load(Config& cfg, const std::string& spec)
{
    if (spec == "locked") {
        apply_setting(cfg, "load.J_l", "\"locked\"");
        return;
    }
    std::istringstream parts(spec);
    std::string part;
    bool inertia = false;
    while (std::getline(parts, part, ',')) {
        const auto eq = part.find('=');
        const std::string key = part.substr(0, eq);
        if (eq == std::string::npos || (key != "jl" && key != "bl"))
            throw Error(Errc::config_rejected, "--load expects 'locked' or jl=<kg m^2>[,bl=<N m s/rad>]");
        apply_setting(cfg, key == "jl" ? "load.J_l" : "load.B_l", part.substr(eq + 1));
        inertia |= key == "jl";
    }
    if (!inertia)
        throw Error(Errc::config_rejected, "--load needs jl=<kg m^2> for a free output");
}

void print_number(std::ostream& out, const char* label, double v, const char* unit)
{
    out << label << " = " << std::setprecision(6) << v << (unit[0] ? " " : "") << unit << "\n";
}

FreqDataset dataset_from_table(const CsvTable& t)
{
    if (t.has("re") && t.has("im")) {
        FreqDataset d;
        d.omega = t.column("omega_rad_s");
        for (std::size_t k = 0; k < t.rows(); ++k)
            d.response.emplace_back(t.column("re")[k], t.column("im")[k]);
        return d;
    }
    return FreqDataset::from_polar(t.column("omega_rad_s"), t.column("magnitude"), t.column("phase_rad"));
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Series elastic actuator model: sweeps, thermal limits, identification"};
    app.require_subcommand(1);
    std::vector<std::string> args(argv, argv + argc);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Chirp sweep, open loop (PWM) or closed loop (torque)");
    std::string sweep_mode;
    ConfigOptions sweep_cfg;
    std::optional<double> amplitude, amplitude_nm, f_start, f_end, sweep_rate;
    std::string load_spec, regulator_flag, dob_flag, out_flag;
    bool no_timestamp = false, log_control = false;
    sweep->add_option("mode", sweep_mode, "open | closed")->required()->check(CLI::IsMember({"open", "closed"}));
    sweep_cfg.add_to(sweep);
    sweep->add_option("--amplitude", amplitude, "Chirp amplitude (PWM for open loop)");
    sweep->add_option("--amplitude-nm", amplitude_nm, "Torque reference amplitude for closed loop, N m");
    sweep->add_option("--load", load_spec, "locked | jl=<kg m^2>[,bl=<N m s/rad>]");
    sweep->add_option("--thermal-regulator", regulator_flag, "on | off")->check(CLI::IsMember({"on", "off"}));
    sweep->add_option("--dob", dob_flag, "on | off")->check(CLI::IsMember({"on", "off"}));
    sweep->add_option("--f-start", f_start, "Hz");
    sweep->add_option("--f-end", f_end, "Hz");
    sweep->add_option("--sweep-rate", sweep_rate, "Hz/s");
    sweep->add_option("--out", out_flag, "Output directory (default $SEA_OUTPUT_DIR or .)");
    sweep->add_flag("--no-timestamp", no_timestamp, "Omit the manifest timestamp");
    sweep->add_flag("--log-control", log_control, "Also write control_log.csv, one row per control period");

    // thermal
    auto* thermal = app.add_subcommand("thermal", "Thermal network calculators");
    thermal->require_subcommand(1);
    ConfigOptions thermal_cfg;
    thermal_cfg.add_to(thermal);
    double current = 0.0, housing_temp = 0.0;
    auto* steady = thermal->add_subcommand("steady", "Steady winding temperature at a constant current");
    steady->add_option("--current", current, "A")->required();
    auto* overload = thermal->add_subcommand("overload", "Overload constant and maximum on-time");
    overload->add_option("--current", current, "Overload current, A")->required();
    overload->add_option("--housing-temp", housing_temp, "Housing temperature at the start, C")->required();
    auto* estimate = thermal->add_subcommand("estimate", "Winding temperature estimate from telemetry");
    std::string telemetry, estimate_out;
    estimate->add_option("--telemetry", telemetry, "CSV: time_s, current_A[, housing_temp_C]")->required();
    estimate->add_option("--output", estimate_out, "Write the CSV here instead of stdout");

    // sysid
    auto* sysid = app.add_subcommand("sysid", "Identification");
    sysid->require_subcommand(1);
    ConfigOptions sysid_cfg;
    sysid_cfg.add_to(sysid);
    std::string input, output;
    auto* fit_tf = sysid->add_subcommand("fit-tf", "Third-order fit of theta_d/V");
    fit_tf->add_option("--input", input,
                       "CSV: omega_rad_s,re,im | omega_rad_s,magnitude,phase_rad | sweep.csv from 'sweep open'")
        ->required();
    fit_tf->add_option("--output", output, "Model JSON path (default stdout)");
    auto* fit_thermal = sysid->add_subcommand("fit-thermal", "Thermal network fit from a current step");
    double step_current = 0.0;
    fit_thermal->add_option("--input", input, "CSV: t_s, T_W_C, T_H_C, T_M_C")->required();
    fit_thermal->add_option("--current", step_current, "Step current, A")->required();
    fit_thermal->add_option("--output", output, "JSON fragment path (default stdout)");
    auto* select = sysid->add_subcommand("select-nominal", "Nominal model with the least worst-case mismatch");
    std::vector<std::string> model_files;
    double omega_min = 1.0, omega_max = 3e4;
    std::size_t points = 40;
    select->add_option("--models", model_files, "Model JSON files (num, den)")->required()->expected(2, -1);
    select->add_option("--omega-min", omega_min, "rad/s");
    select->add_option("--omega-max", omega_max, "rad/s");
    select->add_option("--points", points, "Log-spaced frequency samples");
    select->add_option("--output", output, "Envelope CSV path");
    auto* synth_tf = sysid->add_subcommand("synth-tf", "Sampled response of the configured plant");
    double jm_scale = 1.0, noise = 0.0, temp_noise = 0.0, mc_noise = 0.01;
    std::uint64_t seed = 1;
    std::string model_out;
    synth_tf->add_option("--jm-scale", jm_scale, "Scale applied to J_m");
    synth_tf->add_option("--noise", noise, "Multiplicative complex noise, sigma per part");
    synth_tf->add_option("--seed", seed, "Noise seed");
    synth_tf->add_option("--omega-min", omega_min, "rad/s");
    synth_tf->add_option("--omega-max", omega_max, "rad/s");
    synth_tf->add_option("--points", points, "Log-spaced frequency samples");
    synth_tf->add_option("--output", output, "Response CSV path")->required();
    synth_tf->add_option("--model-out", model_out, "Also write the exact model JSON");
    auto* synth_thermal = sysid->add_subcommand("synth-thermal", "Simulated current step of the thermal network");
    double duration = 1200.0, sample_dt = 0.1;
    synth_thermal->add_option("--current", step_current, "A")->required();
    synth_thermal->add_option("--duration", duration, "s");
    synth_thermal->add_option("--dt", sample_dt, "Sample period, s");
    synth_thermal->add_option("--noise", temp_noise, "Gaussian temperature noise, K");
    synth_thermal->add_option("--seed", seed, "Noise seed");
    synth_thermal->add_option("--output", output, "CSV path")->required();
    auto* monte = sysid->add_subcommand("monte-carlo", "Noise robustness of the third-order fit");
    std::size_t trials = 100;
    double tolerance = 0.02;
    monte->add_option("--trials", trials);
    monte->add_option("--noise", mc_noise, "Multiplicative complex noise, sigma per part");
    monte->add_option("--seed", seed, "Base seed; trial k uses seed + k");
    monte->add_option("--tolerance", tolerance, "Relative coefficient tolerance");
    monte->add_option("--points", points, "Log-spaced frequency samples");

    // config
    auto* config = app.add_subcommand("config", "Configuration schema");
    config->require_subcommand(1);
    auto* defaults = config->add_subcommand("defaults", "Print the default configuration");
    auto* check = config->add_subcommand("check", "Validate a configuration and print it resolved");
    ConfigOptions check_cfg;
    check_cfg.add_to(check);
    (void)defaults;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (sweep->parsed()) {
            Config cfg = sweep_cfg.resolve();
            const bool closed = sweep_mode == "closed";
            if (amplitude_nm && !closed)
                throw Error(Errc::config_rejected, "--amplitude-nm applies to closed-loop sweeps");
            if (amplitude_nm)
                cfg.sweep.amplitude = *amplitude_nm;
            if (amplitude)
                cfg.sweep.amplitude = *amplitude;
            if (f_start)
                cfg.sweep.f_start = *f_start;
            if (f_end)
                cfg.sweep.f_end = *f_end;
            if (sweep_rate)
                cfg.sweep.sweep_rate = *sweep_rate;
            if (!load_spec.empty())
                apply_load(cfg, load_spec);
            if (!regulator_flag.empty())
                cfg.regulator.enabled = regulator_flag == "on";
            if (!dob_flag.empty())
                cfg.dob.enabled = dob_flag == "on";
            cfg.validate();
            if (closed && !cfg.load.locked)
                throw Error(Errc::config_rejected, "closed-loop sweeps run with the output locked");

            const fs::path dir = output_dir(out_flag);
            fs::create_directories(dir);
            std::ofstream control_log;
            SampleObserver observer;
            if (log_control) {
                control_log.open(dir / "control_log.csv");
                control_log << "t_s,command,torque_nm,pwm,x_pid,d_hat,T_W_est_c,T_W_c,T_H_c\n"
                            << std::setprecision(10);
                observer = [&](const SimSample& s) {
                    control_log << s.t << "," << s.command << "," << s.torque << "," << s.pwm << ","
                                << s.control.x_pid << "," << s.control.d_hat << "," << s.control.T_W_est << ","
                                << s.thermal.T_W << "," << s.thermal.T_H << "\n";
                };
            }
            const SweepResult result =
                closed ? run_closed_loop_sweep(cfg.sea, cfg.thermal, cfg.control_stack(), cfg.sweep, cfg.sim, observer)
                       : run_open_loop_sweep(cfg.sea, cfg.load, cfg.thermal, cfg.sweep, cfg.sim, observer);
            write_csv(dir / "sweep.csv", sweep_table(result));
            write_text(dir / "summary.json", sweep_summary_json(result, cfg));
            write_text(dir / "run_manifest.json", run_manifest_json(cfg, args, no_timestamp ? "" : utc_timestamp()));

            auto show = [](const std::optional<double>& v) {
                std::ostringstream s;
                if (v)
                    s << std::setprecision(5) << *v << " Hz";
                else
                    s << "none";
                return s.str();
            };
            std::cout << "bandwidth_3db: " << show(result.bandwidth_3db) << "\n"
                      << "thermal_limit: " << show(result.thermal_limit_freq) << "\n"
                      << "accessible_bandwidth: " << show(result.accessible_bandwidth) << "\n"
                      << "wrote " << (dir / "sweep.csv").string() << "\n";
            if (result.terminated_early) {
                std::cerr << "sweep stopped at T_MAX at " << *result.thermal_limit_freq << " Hz\n";
                return exit_thermal;
            }
            return exit_ok;
        }

        if (thermal->parsed()) {
            const Config cfg = thermal_cfg.resolve();
            cfg.validate();
            const ThermalParams& p = cfg.thermal;
            if (steady->parsed()) {
                print_number(std::cout, "T_W_steady", steady_state_winding_temp(current, p), "C");
                return exit_ok;
            }
            if (overload->parsed()) {
                const OverloadBudget b = overload_budget(current, housing_temp, p);
                print_number(std::cout, "i_N", nominal_current(p), "A");
                print_number(std::cout, "K_o", b.K_o, "");
                if (b.t_on)
                    print_number(std::cout, "t_on", *b.t_on, "s");
                else
                    std::cout << "t_on = UNBOUNDED\n";
                std::cout << "capped_at_5_tau1 = " << (b.capped ? "yes" : "no") << "\n";
                print_number(std::cout, "T_beta", b.t_beta, "C");
                return exit_ok;
            }
            const CsvTable t = read_csv(telemetry);
            const auto& time = t.column("time_s");
            const auto& amps = t.column("current_A");
            const bool measured = t.has("housing_temp_C");
            WindingTempEstimator est(p);
            CsvTable out;
            out.header = {"time_s", "T_W_est_C"};
            out.columns.resize(2);
            for (std::size_t k = 0; k < t.rows(); ++k) {
                double tw = p.T_A;
                if (k > 0) {
                    const double dt = time[k] - time[k - 1];
                    tw = measured ? est.update(t.column("housing_temp_C")[k], amps[k], dt) : est.update(amps[k], dt);
                }
                out.columns[0].push_back(time[k]);
                out.columns[1].push_back(tw);
            }
            if (estimate_out.empty())
                write_csv(std::cout, out);
            else
                write_csv(estimate_out, out);
            return exit_ok;
        }

        if (sysid->parsed()) {
            const Config cfg = sysid_cfg.resolve();
            cfg.validate();
            auto emit = [&](const std::string& text) {
                if (output.empty())
                    std::cout << text;
                else
                    write_text(output, text);
            };
            FitOptions options;
            options.gain = cfg.sea.motor.K_tau / cfg.sea.N;

            if (fit_tf->parsed()) {
                const CsvTable t = read_csv(input);
                ThirdOrderFit fit;
                if (t.has("freq_hz") && t.has("gain")) {
                    // Open-loop sweep: torque per PWM back to deflection per volt.
                    const double to_volt = cfg.sea.K_s * cfg.sea.V_nominal;
                    std::vector<double> omega, mag;
                    for (std::size_t k = 0; k < t.rows(); ++k) {
                        omega.push_back(2.0 * std::numbers::pi * t.column("freq_hz")[k]);
                        mag.push_back(t.column("gain")[k] / to_volt);
                    }
                    const double a3 = cfg.sea.motor.J_m * cfg.sea.motor.L;
                    fit = fit_third_order_magnitude(omega, mag, a3, options);
                } else {
                    fit = fit_third_order(dataset_from_table(t), options);
                }
                emit(fit_json(fit));
                std::cerr << "relative RMS residual " << fit.residual << "\n";
                return exit_ok;
            }
            if (fit_thermal->parsed()) {
                const CsvTable t = read_csv(input);
                ThermalStepDataset d{t.column("t_s"), t.column("T_W_C"), t.column("T_H_C"), t.column("T_M_C"),
                                     step_current};
                const ThermalFit fit = fit_thermal_step(d, cfg.thermal);
                emit(thermal_fit_json(fit));
                std::cerr << "node RMSE [K]: " << fit.node_rmse[0] << " " << fit.node_rmse[1] << " "
                          << fit.node_rmse[2] << ", winding NRMSE " << fit.nrmse << "\n";
                for (const auto& w : fit.warnings)
                    std::cerr << "warning: " << w << "\n";
                return exit_ok;
            }
            if (select->parsed()) {
                std::vector<TransferFunction> models;
                for (const auto& f : model_files)
                    models.push_back(model_from_json(read_text(f), f));
                const auto omegas = log_space(omega_min, omega_max, points);
                const NominalSelection sel = select_nominal(models, omegas);
                std::cout << "nominal_index = " << sel.index << "\n"
                          << "nominal_model = " << model_files[sel.index] << "\n";
                print_number(std::cout, "max_mismatch", sel.max_mismatch, "");
                if (!output.empty()) {
                    CsvTable env;
                    env.header = {"omega_rad_s", "max_abs_delta"};
                    env.columns = {omegas, sel.envelope};
                    write_csv(output, env);
                }
                return exit_ok;
            }
            if (synth_tf->parsed()) {
                SeaParams sea = cfg.sea;
                sea.motor.J_m *= jm_scale;
                const TransferFunction g = output_locked_tf(sea);
                FreqDataset d = sample_response(g, log_space(omega_min, omega_max, points));
                if (noise > 0.0)
                    d = with_multiplicative_noise(d, noise, seed);
                CsvTable t;
                t.header = {"omega_rad_s", "re", "im"};
                t.columns.resize(3);
                for (std::size_t k = 0; k < d.omega.size(); ++k) {
                    t.columns[0].push_back(d.omega[k]);
                    t.columns[1].push_back(d.response[k].real());
                    t.columns[2].push_back(d.response[k].imag());
                }
                write_csv(output, t);
                if (!model_out.empty()) {
                    ThirdOrderFit exact;
                    exact.gain = g.num()(0);
                    exact.A = {g.den()(3), g.den()(2), g.den()(1), g.den()(0)};
                    write_text(model_out, fit_json(exact));
                }
                return exit_ok;
            }
            if (synth_thermal->parsed()) {
                const ThermalStepDataset d = simulate_thermal_step(cfg.thermal, step_current, duration, sample_dt);
                std::mt19937_64 rng(seed);
                std::normal_distribution<double> n(0.0, temp_noise);
                CsvTable t;
                t.header = {"t_s", "T_W_C", "T_H_C", "T_M_C"};
                t.columns = {d.t, d.T_W, d.T_H, d.T_M};
                if (temp_noise > 0.0) {
                    for (std::size_t j = 1; j < 4; ++j)
                        for (double& v : t.columns[j])
                            v += n(rng);
                }
                write_csv(output, t);
                return exit_ok;
            }
            // monte-carlo
            const TransferFunction g = output_locked_tf(cfg.sea);
            const FreqDataset clean = sample_response(g, log_space(omega_min, omega_max, points));
            const std::array<double, 4> truth{g.den()(3), g.den()(2), g.den()(1), g.den()(0)};
            std::size_t within = 0;
            double worst = 0.0;
            for (std::size_t k = 0; k < trials; ++k) {
                const ThirdOrderFit fit = fit_third_order(with_multiplicative_noise(clean, mc_noise, seed + k), options);
                double err = 0.0;
                for (int j = 0; j < 4; ++j)
                    err = std::max(err, std::abs(fit.A[j] / truth[j] - 1.0));
                worst = std::max(worst, err);
                within += err <= tolerance;
            }
            std::cout << "trials = " << trials << "\nwithin_tolerance = " << within << "\n";
            print_number(std::cout, "pass_fraction", static_cast<double>(within) / static_cast<double>(trials), "");
            print_number(std::cout, "worst_relative_error", worst, "");
            return exit_ok;
        }

        if (defaults->parsed()) {
            std::cout << config_to_json(Config{});
            return exit_ok;
        }
        if (check->parsed()) {
            const Config cfg = check_cfg.resolve();
            cfg.validate();
            std::cout << config_to_json(cfg);
            return exit_ok;
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    }
    return exit_ok;
}
