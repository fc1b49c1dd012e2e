#pragma once

// Run configuration with a flat dotted-key JSON schema, CSV tables, and the
// JSON artifacts written next to every sweep.

#include "sea/control.hpp"
#include "sea/electromech.hpp"
#include "sea/sim.hpp"
#include "sea/sysid.hpp"
#include "sea/thermo.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sea {

struct DobSettings
{
    bool enabled = true;
    int q_order = 3;
    double q_cutoff = 80.0; // rad/s
};

struct RegulatorSettings
{
    bool enabled = false;
    ThermalRegulatorConfig params;
};

struct Config
{
    SeaParams sea;
    LoadParams load;
    ThermalParams thermal;
    PidConfig pid;
    DobSettings dob;
    RegulatorSettings regulator;
    SimConfig sim;
    ChirpSpec sweep;

    /// Throws Errc::config_rejected naming the offending group.
    void validate() const;

    ControlStackConfig control_stack() const;
};

/// Every key of the schema in documentation order.
std::vector<std::string> config_keys();

/// Sets one key from JSON text ("1.5", "true", "\"locked\"") or a bare
/// word, which is read as a string. Throws Errc::config_rejected.
void apply_setting(Config& cfg, std::string_view key, std::string_view value);

/// Parses a flat JSON object over the defaults. Syntax errors carry the line,
/// unknown keys and bad values carry the key and its line.
Config parse_config(std::string_view text, std::string_view source = "config");
Config load_config(const std::filesystem::path& path);

/// Flat JSON object of the fully resolved configuration.
std::string config_to_json(const Config& cfg, int indent = 2);

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    bool has(std::string_view name) const;
    const std::vector<double>& column(std::string_view name) const;
};

/// Header row plus numeric rows. Throws Errc::parse_error with the line.
CsvTable parse_csv(std::string_view text, std::string_view source = "csv");
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// freq_hz, torque_mag_nm, gain, winding_temp_c, housing_temp_c, pwm_rms
CsvTable sweep_table(const SweepResult& result);

std::string sweep_summary_json(const SweepResult& result, const Config& cfg);

/// Echo of the resolved configuration and the command line. The timestamp
/// is omitted when empty so repeated runs are byte identical.
std::string run_manifest_json(const Config& cfg, const std::vector<std::string>& argv, std::string_view timestamp);

std::string fit_json(const ThirdOrderFit& fit);
TransferFunction model_from_json(std::string_view text, std::string_view source = "model");

/// thermal.* keys of a fit, ready to merge into a config file.
std::string thermal_fit_json(const ThermalFit& fit);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

} // namespace sea
