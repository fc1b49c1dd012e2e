#pragma once

// Four-body lumped thermal network of the actuator: winding (W), stator
// housing (H) and motor proximity (M) capacitances chained through R1, R2,
// R3 to an ambient node held at T_A. All temperatures are in degrees C;
// every formula only uses differences so no Kelvin offset is needed.

#include <Eigen/Core>

#include <optional>

namespace sea {

struct ThermalParams
{
    double R1 = 5.368;  // K/W, winding -> housing
    double R2 = 1.253;  // K/W, housing -> motor proximity
    double R3 = 0.357;  // K/W, motor proximity -> ambient
    double tau1 = 1.49; // s
    double tau2 = 13.66;
    double tau3 = 60.0; // only bounded from below by the identification data
    double alpha_cu = 3.93e-3; // 1/K
    double R_A = 6.840;        // ohm at T_A
    double T_A = 25.0;
    double i_source = 0.0; // W, electronics heat injected at the M node
    double T_MAX = 130.0;

    double C1() const { return tau1 / R1; }
    double C2() const { return tau2 / R2; }
    double C3() const { return tau3 / R3; }
    double R_total() const { return R1 + R2 + R3; }

    void validate() const;
};

struct ThermalState
{
    double T_W = 25.0;
    double T_H = 25.0;
    double T_M = 25.0;

    static ThermalState ambient(const ThermalParams& p) { return {p.T_A, p.T_A, p.T_A}; }

    Eigen::Vector3d vec() const { return {T_W, T_H, T_M}; }
    static ThermalState from(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }
};

struct OverloadBudget
{
    double K_o = 0.0;
    std::optional<double> t_on; // empty: unbounded, overload is steady-state safe
    double t_beta = 0.0;        // steady winding temperature the overload would reach
    bool capped = false;        // t_on clipped to the 5 tau1 short-term bound
};

/// R_A (1 + alpha (T_W - T_A)) i^2.
double joule_power(double i_m, double T_W, const ThermalParams& p);

/// Node balances of the network solved for dT/dt.
ThermalState thermal_derivatives(const ThermalState& s, double i_m, const ThermalParams& p);

/// Same, driven by a mean-square current (used when the current is averaged
/// over a thermal integration step).
ThermalState thermal_derivatives_ms(const ThermalState& s, double i_m_sq, const ThermalParams& p);

/// One RK4 step with constant mean-square current.
ThermalState thermal_step(const ThermalState& s, double i_m_sq, double dt, const ThermalParams& p);

/// Heat stored above ambient, sum C_k (T_k - T_A), in J.
double stored_energy(const ThermalState& s, const ThermalParams& p);

double steady_state_winding_temp(double i_m, const ThermalParams& p);

/// Continuous current whose steady winding temperature is exactly T_MAX.
double nominal_current(const ThermalParams& p);

/// Maximum safe on-time tau1 ln(K_o^2 / (K_o^2 - 1)); empty when K_o <= 1.
std::optional<double> on_time(double K_o, double tau1);

OverloadBudget overload_budget(double i_O, double T_H_initial, const ThermalParams& p);

/// Winding temperature during a brief overload with the housing acting as
/// ambient: T_H + (T_beta - T_H)(1 - exp(-t/tau1)).
double overload_transient(double T_H, double T_beta, double t, const ThermalParams& p);

struct WindingEstimate
{
    double T_W;
    double T_H;
};

/// One step of the winding estimator. The winding-over-housing rise follows
/// the R1 C1 convolution kernel, advanced exactly for a Joule power held
/// constant over dt and evaluated at the previous winding estimate.
double estimate_winding_temp(const WindingEstimate& prev, double T_H_now, double i_m_now, double dt,
                             const ThermalParams& p);

/// Stateful estimator stream. Uses a measured housing temperature when one
/// is supplied, otherwise a first-order housing model with tau2 driven by the
/// same Joule power.
class WindingTempEstimator
{
public:
    explicit WindingTempEstimator(const ThermalParams& p);
    WindingTempEstimator(const ThermalParams& p, double T_W0, double T_H0);

    double update(double T_H_measured, double i_m, double dt);
    double update(double i_m, double dt);

    double winding_temp() const { return estimate_.T_W; }
    double housing_temp() const { return estimate_.T_H; }

private:
    ThermalParams params_;
    WindingEstimate estimate_;
};

} // namespace sea
