#pragma once

// Electromechanical model of the series elastic actuator: electrical and
// mechanical transfer functions, the 3x3 map (tau_m, d_d, d_l) ->
// (theta_d, theta_l, theta_m), and the output-locked voltage-to-deflection
// plant.

#include "sea/lti.hpp"

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace sea {

struct MotorParams
{
    double R = 6.840;       // ohm, effective winding resistance
    double L = 0.794e-3;    // H
    double K_e = 2.8e-3;    // V s/rad
    double K_tau = 5.484e-3; // N m/A
    double J_m = 5.615e-8;  // kg m^2
    double B_m = 8.726e-7;  // N m s/rad

    void validate() const;
};

struct SeaParams
{
    MotorParams motor;
    double K_s = 130.0;      // N m/rad
    double N = 1742.222;     // gear reduction N:1
    double V_nominal = 24.0; // V at PWM = 1

    void validate() const;
};

/// Load-side inertia and damping. A locked output is infinite inertia.
struct LoadParams
{
    bool locked = true;
    double J_l = 0.0; // kg m^2, ignored when locked
    double B_l = 0.0; // N m s/rad

    static LoadParams locked_output() { return {}; }
    static LoadParams inertia(double J_l, double B_l = 0.0) { return {false, J_l, B_l}; }

    void validate() const;
};

struct UncertaintySample
{
    double omega;
    std::complex<double> delta;
};

/// Rows (theta_d, theta_l, theta_m), columns (tau_m, d_d, d_l).
using TfMatrix3 = std::array<std::array<TransferFunction, 3>, 3>;

/// P_e(s) = K_tau / (L s + R): voltage to motor torque with the rotor held.
TransferFunction electrical_tf(const SeaParams& p);

/// P_m(s) = 1 / (J_m s^2 + B_m s): net torque to motor angle.
TransferFunction mechanical_tf(const SeaParams& p);

/// P_l(s) = 1 / (s (J_l s + B_l)); zero for a locked output.
TransferFunction load_tf(const LoadParams& l);

TfMatrix3 mimo_matrix(const SeaParams& p, const LoadParams& l);

/// theta_d / V with the output locked, third order with coefficients
/// A3 = J_m L, A2 = B_m L + J_m R, A1 = K_e K_tau + K_s L/N^2 + B_m R,
/// A0 = K_s R / N^2 and numerator K_tau / N.
TransferFunction output_locked_tf(const SeaParams& p);

/// theta_d / V for any load, obtained by closing the back-EMF loop around
/// the mechanical matrix. Coincides with output_locked_tf for a locked load.
TransferFunction voltage_to_deflection_tf(const SeaParams& p, const LoadParams& l);

/// Output torque per unit PWM: K_s V_nominal theta_d/V.
TransferFunction torque_per_pwm_tf(const SeaParams& p, const LoadParams& l = LoadParams::locked_output());

/// Multiplicative model mismatch (G_x - G_nominal) / G_nominal per frequency.
std::vector<UncertaintySample> uncertainty(const TransferFunction& g_x, const TransferFunction& g_nominal,
                                           std::span<const double> omegas);

} // namespace sea
