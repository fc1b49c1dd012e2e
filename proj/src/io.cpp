#include "sea/io.hpp"

#include "sea/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace sea {

namespace {

using json = nlohmann::ordered_json;

struct Field
{
    const char* key;
    std::function<json(const Config&)> get;
    std::function<void(Config&, const json&)> set;
};

[[noreturn]] void reject(std::string_view key, std::string_view why)
{
    std::ostringstream msg;
    msg << "key '" << key << "': " << why;
    throw Error(Errc::config_rejected, msg.str());
}

double as_number(const json& v, std::string_view key)
{
    if (!v.is_number())
        reject(key, "expected a number");
    return v.get<double>();
}

int as_int(const json& v, std::string_view key)
{
    if (!v.is_number_integer())
        reject(key, "expected an integer");
    return v.get<int>();
}

bool as_bool(const json& v, std::string_view key)
{
    if (v.is_boolean())
        return v.get<bool>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "on" || s == "true")
            return true;
        if (s == "off" || s == "false")
            return false;
    }
    reject(key, "expected true/false or on/off");
}

#define SEA_NUMBER(KEY, EXPR) \
    Field { KEY, [](const Config& c) { return json(c.EXPR); }, [](Config& c, const json& v) { c.EXPR = as_number(v, KEY); } }

const std::vector<Field>& schema()
{
    static const std::vector<Field> fields = {
        SEA_NUMBER("motor.R", sea.motor.R),
        SEA_NUMBER("motor.L", sea.motor.L),
        SEA_NUMBER("motor.K_e", sea.motor.K_e),
        SEA_NUMBER("motor.K_tau", sea.motor.K_tau),
        SEA_NUMBER("motor.J_m", sea.motor.J_m),
        SEA_NUMBER("motor.B_m", sea.motor.B_m),
        SEA_NUMBER("sea.K_s", sea.K_s),
        SEA_NUMBER("sea.N", sea.N),
        SEA_NUMBER("sea.V_nominal", sea.V_nominal),
        Field{"load.J_l",
              [](const Config& c) { return c.load.locked ? json("locked") : json(c.load.J_l); },
              [](Config& c, const json& v) {
                  if (v.is_string() && v.get<std::string>() == "locked") {
                      c.load.locked = true;
                      c.load.J_l = 0.0;
                  } else {
                      c.load.locked = false;
                      c.load.J_l = as_number(v, "load.J_l");
                  }
              }},
        SEA_NUMBER("load.B_l", load.B_l),
        SEA_NUMBER("thermal.R1", thermal.R1),
        SEA_NUMBER("thermal.R2", thermal.R2),
        SEA_NUMBER("thermal.R3", thermal.R3),
        SEA_NUMBER("thermal.tau1", thermal.tau1),
        SEA_NUMBER("thermal.tau2", thermal.tau2),
        SEA_NUMBER("thermal.tau3", thermal.tau3),
        SEA_NUMBER("thermal.alpha_cu", thermal.alpha_cu),
        SEA_NUMBER("thermal.R_A", thermal.R_A),
        SEA_NUMBER("thermal.T_A", thermal.T_A),
        SEA_NUMBER("thermal.i_source", thermal.i_source),
        SEA_NUMBER("thermal.T_MAX", thermal.T_MAX),
        SEA_NUMBER("pid.kp", pid.kp),
        SEA_NUMBER("pid.ki", pid.ki),
        SEA_NUMBER("pid.kd", pid.kd),
        SEA_NUMBER("pid.derivative_filter_tau", pid.derivative_filter_tau),
        Field{"dob.enabled", [](const Config& c) { return json(c.dob.enabled); },
              [](Config& c, const json& v) { c.dob.enabled = as_bool(v, "dob.enabled"); }},
        Field{"dob.q_order", [](const Config& c) { return json(c.dob.q_order); },
              [](Config& c, const json& v) { c.dob.q_order = as_int(v, "dob.q_order"); }},
        SEA_NUMBER("dob.q_cutoff", dob.q_cutoff),
        Field{"regulator.enabled", [](const Config& c) { return json(c.regulator.enabled); },
              [](Config& c, const json& v) { c.regulator.enabled = as_bool(v, "regulator.enabled"); }},
        SEA_NUMBER("regulator.trigger_fraction", regulator.params.trigger_fraction),
        SEA_NUMBER("regulator.min_gain", regulator.params.min_gain),
        SEA_NUMBER("regulator.filter_cutoff_max", regulator.params.filter_cutoff_max),
        SEA_NUMBER("regulator.filter_cutoff_min", regulator.params.filter_cutoff_min),
        SEA_NUMBER("sim.dt", sim.dt),
        SEA_NUMBER("sim.control_dt", sim.control_dt),
        Field{"sim.thermal_decimation", [](const Config& c) { return json(c.sim.thermal_decimation); },
              [](Config& c, const json& v) { c.sim.thermal_decimation = as_int(v, "sim.thermal_decimation"); }},
        Field{"sim.electrical",
              [](const Config& c) {
                  return json(c.sim.electrical == ElectricalStep::exponential ? "exponential" : "rk4");
              },
              [](Config& c, const json& v) {
                  const std::string s = v.is_string() ? v.get<std::string>() : "";
                  if (s == "exponential")
                      c.sim.electrical = ElectricalStep::exponential;
                  else if (s == "rk4")
                      c.sim.electrical = ElectricalStep::rk4;
                  else
                      reject("sim.electrical", "expected \"exponential\" or \"rk4\"");
              }},
        Field{"sim.halt_at_t_max", [](const Config& c) { return json(c.sim.halt_at_t_max); },
              [](Config& c, const json& v) { c.sim.halt_at_t_max = as_bool(v, "sim.halt_at_t_max"); }},
        SEA_NUMBER("sweep.amplitude", sweep.amplitude),
        SEA_NUMBER("sweep.f_start", sweep.f_start),
        SEA_NUMBER("sweep.f_end", sweep.f_end),
        SEA_NUMBER("sweep.sweep_rate", sweep.sweep_rate),
    };
    return fields;
}

#undef SEA_NUMBER

const Field* find_field(std::string_view key)
{
    const auto& fields = schema();
    auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return key == f.key; });
    return it == fields.end() ? nullptr : &*it;
}

std::size_t line_of_offset(std::string_view text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

std::size_t line_of_key(std::string_view text, std::string_view key)
{
    const std::string quoted = "\"" + std::string(key) + "\"";
    const auto pos = text.find(quoted);
    return pos == std::string_view::npos ? 0 : line_of_offset(text, pos);
}

json optional_number(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

std::string format_number(double v)
{
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

json config_object(const Config& cfg)
{
    json out = json::object();
    for (const Field& f : schema())
        out[f.key] = f.get(cfg);
    return out;
}

} // namespace

void Config::validate() const
{
    auto group = [](const char* name, auto&& check) {
        try {
            check();
        } catch (const Error& e) {
            throw Error(Errc::config_rejected, std::string(name) + ": " + e.what());
        }
    };
    group("motor/sea", [&] { sea.validate(); });
    group("load", [&] { load.validate(); });
    group("thermal", [&] { thermal.validate(); });
    group("pid", [&] { pid.validate(); });
    group("regulator", [&] { regulator.params.validate(); });
    group("sim", [&] { sim.validate(sea); });
    group("sweep", [&] { sweep.validate(); });
    group("dob", [&] { ControlStack stack(control_stack()); });
}

ControlStackConfig Config::control_stack() const
{
    ControlStackConfig c;
    c.pid = pid;
    if (dob.enabled) {
        DobConfig d = DobConfig::for_plant(sea, sim.control_dt);
        d.q_order = dob.q_order;
        d.q_cutoff = dob.q_cutoff;
        c.dob = d;
    }
    if (regulator.enabled)
        c.regulator = regulator.params;
    c.thermal = thermal;
    c.K_s = sea.K_s;
    c.sample_period = sim.control_dt;
    return c;
}

std::vector<std::string> config_keys()
{
    std::vector<std::string> keys;
    for (const Field& f : schema())
        keys.emplace_back(f.key);
    return keys;
}

void apply_setting(Config& cfg, std::string_view key, std::string_view value)
{
    const Field* field = find_field(key);
    if (!field)
        reject(key, "unknown key");
    json v = json::parse(value, nullptr, false);
    if (v.is_discarded())
        v = json(std::string(value));
    field->set(cfg, v);
}

Config parse_config(std::string_view text, std::string_view source)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        std::ostringstream msg;
        msg << source << ":" << line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0) << ": malformed JSON ("
            << e.what() << ")";
        throw Error(Errc::parse_error, msg.str());
    }
    if (!doc.is_object())
        throw Error(Errc::parse_error, std::string(source) + ":1: configuration must be a JSON object");
    Config cfg;
    for (const auto& [key, value] : doc.items()) {
        const Field* field = find_field(key);
        std::ostringstream where;
        where << source << ":" << line_of_key(text, key) << ": ";
        if (!field)
            throw Error(Errc::config_rejected, where.str() + "unknown key '" + key + "'");
        try {
            field->set(cfg, value);
        } catch (const Error& e) {
            throw Error(Errc::config_rejected, where.str() + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

Config load_config(const std::filesystem::path& path)
{
    return parse_config(read_text(path), path.string());
}

std::string config_to_json(const Config& cfg, int indent)
{
    return config_object(cfg).dump(indent) + "\n";
}

bool CsvTable::has(std::string_view name) const
{
    return std::find(header.begin(), header.end(), name) != header.end();
}

const std::vector<double>& CsvTable::column(std::string_view name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw Error(Errc::parse_error, "missing CSV column '" + std::string(name) + "'");
    return columns[static_cast<std::size_t>(it - header.begin())];
}

CsvTable parse_csv(std::string_view text, std::string_view source)
{
    auto split = [](std::string_view line) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            std::string cell(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
            cell.erase(0, cell.find_first_not_of(" \t\r"));
            cell.erase(cell.find_last_not_of(" \t\r") + 1);
            cells.push_back(std::move(cell));
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        return cells;
    };

    CsvTable table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        std::string_view line = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos)
            continue;
        auto cells = split(line);
        if (table.header.empty()) {
            table.header = std::move(cells);
            table.columns.resize(table.header.size());
            continue;
        }
        std::ostringstream where;
        where << source << ":" << line_no << ": ";
        if (cells.size() != table.header.size())
            throw Error(Errc::parse_error, where.str() + "expected " + std::to_string(table.header.size()) +
                                               " fields, found " + std::to_string(cells.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[j], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != cells[j].size())
                throw Error(Errc::parse_error, where.str() + "field '" + table.header[j] + "' is not a number: '" +
                                                   cells[j] + "'");
            table.columns[j].push_back(v);
        }
    }
    if (table.header.empty())
        throw Error(Errc::parse_error, std::string(source) + ": empty CSV, no header row");
    if (table.rows() == 0)
        throw Error(Errc::parse_error, std::string(source) + ": CSV has a header but no data rows");
    return table;
}

CsvTable read_csv(const std::filesystem::path& path)
{
    return parse_csv(read_text(path), path.string());
}

void write_csv(std::ostream& out, const CsvTable& table)
{
    for (std::size_t j = 0; j < table.header.size(); ++j)
        out << (j ? "," : "") << table.header[j];
    out << "\n";
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t j = 0; j < table.columns.size(); ++j)
            out << (j ? "," : "") << format_number(table.columns[j][r]);
        out << "\n";
    }
}

void write_csv(const std::filesystem::path& path, const CsvTable& table)
{
    std::ostringstream out;
    write_csv(out, table);
    write_text(path, out.str());
}

CsvTable sweep_table(const SweepResult& r)
{
    CsvTable t;
    t.header = {"freq_hz", "torque_mag_nm", "gain", "winding_temp_c", "housing_temp_c", "pwm_rms"};
    t.columns = {r.freq_grid, r.torque_magnitude, r.gain, r.winding_temp, r.housing_temp, r.pwm_rms};
    return t;
}

std::string sweep_summary_json(const SweepResult& r, const Config& cfg)
{
    json out;
    out["mode"] = r.mode == SweepMode::open_loop ? "open" : "closed";
    out["amplitude"] = r.chirp.amplitude;
    out["amplitude_unit"] = r.mode == SweepMode::open_loop ? "pwm" : "N m";
    out["bandwidth_3db_hz"] = optional_number(r.bandwidth_3db);
    out["thermal_limit_hz"] = optional_number(r.thermal_limit_freq);
    out["accessible_bandwidth_hz"] = optional_number(r.accessible_bandwidth);
    out["terminated_early"] = r.terminated_early;
    out["halt_time_s"] = optional_number(r.outcome.halt_time);
    out["end_time_s"] = r.outcome.end_time;
    out["reference_gain"] = r.reference_gain;
    if (!r.gain.empty()) {
        const auto peak = std::max_element(r.torque_magnitude.begin(), r.torque_magnitude.end());
        out["peak_torque_nm"] = *peak;
        out["peak_torque_freq_hz"] = r.freq_grid[static_cast<std::size_t>(peak - r.torque_magnitude.begin())];
        out["max_winding_temp_c"] = *std::max_element(r.winding_temp.begin(), r.winding_temp.end());
    }
    out["samples"] = r.freq_grid.size();
    out["heat_in_j"] = r.outcome.heat_in;
    out["heat_out_j"] = r.outcome.heat_out;
    out["final_winding_temp_c"] = r.outcome.thermal.T_W;
    out["config"] = config_object(cfg);
    return out.dump(2) + "\n";
}

std::string run_manifest_json(const Config& cfg, const std::vector<std::string>& argv, std::string_view timestamp)
{
    json out;
    out["tool"] = "seactl";
    out["command"] = argv;
    if (!timestamp.empty())
        out["timestamp"] = std::string(timestamp);
    out["config"] = config_object(cfg);
    return out.dump(2) + "\n";
}

std::string fit_json(const ThirdOrderFit& fit)
{
    json out;
    out["num"] = {fit.gain};
    out["den"] = {fit.A[3], fit.A[2], fit.A[1], fit.A[0]};
    out["A0"] = fit.A[0];
    out["A1"] = fit.A[1];
    out["A2"] = fit.A[2];
    out["A3"] = fit.A[3];
    out["gain"] = fit.gain;
    out["residual"] = fit.residual;
    out["iterations"] = fit.iterations;
    return out.dump(2) + "\n";
}

TransferFunction model_from_json(std::string_view text, std::string_view source)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::parse_error, std::string(source) + ": malformed JSON (" + e.what() + ")");
    }
    auto coeffs = [&](const char* key) {
        if (!doc.contains(key) || !doc[key].is_array() || doc[key].empty())
            throw Error(Errc::parse_error, std::string(source) + ": model needs a non-empty '" + key + "' array");
        Vec<double> p(static_cast<Eigen::Index>(doc[key].size()));
        for (std::size_t k = 0; k < doc[key].size(); ++k) {
            if (!doc[key][k].is_number())
                throw Error(Errc::parse_error, std::string(source) + ": '" + key + "' holds a non-number");
            p(static_cast<Eigen::Index>(k)) = doc[key][k].get<double>();
        }
        return p;
    };
    return TransferFunction(coeffs("num"), coeffs("den"));
}

std::string thermal_fit_json(const ThermalFit& fit)
{
    json out;
    out["thermal.R1"] = fit.params.R1;
    out["thermal.R2"] = fit.params.R2;
    out["thermal.R3"] = fit.params.R3;
    out["thermal.tau1"] = fit.params.tau1;
    out["thermal.tau2"] = fit.params.tau2;
    out["thermal.tau3"] = fit.params.tau3;
    return out.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(Errc::invalid_argument, "cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out)
        throw Error(Errc::invalid_argument, "failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::invalid_argument, "cannot open '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace sea
