#pragma once

// Identification of the output-locked third-order plant from frequency
// response data, nominal model selection over a family of fits, and the
// thermal network fit from a constant-current step.

#include "sea/electromech.hpp"
#include "sea/lti.hpp"
#include "sea/thermo.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sea {

struct FreqDataset
{
    std::vector<double> omega; // rad/s, strictly increasing
    std::vector<std::complex<double>> response;
    std::optional<double> amplitude; // source PWM amplitude label

    static FreqDataset from_polar(std::vector<double> omega, std::span<const double> magnitude,
                                  std::span<const double> phase_rad);

    /// Throws Errc::ill_posed_fit on too few samples or too narrow a span.
    void validate(std::size_t min_samples = 8, double min_decades = 1.5) const;
};

enum class FitWeighting { log_uniform, uniform };

struct FitOptions
{
    // Numerator of theta_d/V. Pinning it removes the common scale between
    // numerator and denominator; the default is the nominal K_tau/N.
    double gain = 5.484e-3 / 1742.222;
    FitWeighting weighting = FitWeighting::log_uniform;
    int max_iterations = 30;
    double tolerance = 1e-13; // relative coefficient change that ends the iteration
};

struct ThirdOrderFit
{
    double gain = 0.0;
    std::array<double, 4> A{}; // A0..A3, denominator A3 s^3 + A2 s^2 + A1 s + A0
    double residual = 0.0;     // RMS of the relative complex error
    int iterations = 0;

    TransferFunction model() const;
};

/// Weighted complex least squares on gain / (A3 s^3 + A2 s^2 + A1 s + A0),
/// refined by Sanathanan-Koerner reweighting so the relative output error
/// is minimised. Throws Errc::ill_posed_fit on a rank-deficient regression.
ThirdOrderFit fit_third_order(const FreqDataset& data, const FitOptions& options = {});

/// Magnitude-only variant for phase-free sweep data. A3 cannot be seen
/// well below the electrical pole, so it is held at a_3 and A0..A2 are fitted.
ThirdOrderFit fit_third_order_magnitude(std::span<const double> omega, std::span<const double> magnitude,
                                        double a_3, const FitOptions& options = {});

struct NominalSelection
{
    std::size_t index = 0;
    double max_mismatch = 0.0;  // max over candidates and frequencies of |Delta|
    std::vector<double> envelope; // worst |Delta| per frequency against the selected model
};

/// Picks the candidate minimising the worst multiplicative mismatch
/// |G_i/G_n - 1| of every other candidate. Throws Errc::singular_nominal when
/// a candidate has zero response at a frequency.
NominalSelection select_nominal(std::span<const TransferFunction> models, std::span<const double> omegas);

/// Same on sampled responses: one row per candidate, one column per frequency.
NominalSelection select_nominal(const Mat<std::complex<double>>& responses);

/// Constant-current step record of the three measured nodes.
struct ThermalStepDataset
{
    std::vector<double> t;
    std::vector<double> T_W;
    std::vector<double> T_H;
    std::vector<double> T_M;
    double i_m = 0.0;

    void validate() const;
};

struct ThermalFit
{
    ThermalParams params;
    std::array<double, 3> node_rmse{}; // K, integral-form residual per node
    double nrmse = 0.0;                // winding residual over its rise
    bool settled = true;
    bool tau3_lower_bound = false;
    std::vector<std::string> warnings;
};

/// Steady-state levels give R1, R2, R3; the capacitances then come from the
/// integrated node balances. R_A, alpha_cu, T_A, i_source and T_MAX are taken
/// from the priors. Throws Errc::ill_posed_fit for i_m = 0.
ThermalFit fit_thermal_step(const ThermalStepDataset& data, const ThermalParams& priors = {});

/// Noiseless frequency response samples of a model.
FreqDataset sample_response(const TransferFunction& model, std::span<const double> omega);

/// Multiplies every sample by (1 + e) with e complex Gaussian, sigma per part.
FreqDataset with_multiplicative_noise(const FreqDataset& data, double sigma, std::uint64_t seed);

/// RK4 integration of the network from ambient at constant current.
ThermalStepDataset simulate_thermal_step(const ThermalParams& params, double i_m, double duration,
                                         double sample_dt, double step = 1e-3);

std::vector<double> log_space(double lo, double hi, std::size_t n);

} // namespace sea
