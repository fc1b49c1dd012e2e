#include "sea/sysid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace sea;

namespace {

const std::vector<double> grid = log_space(0.5, 5000.0, 60);

double rel(double a, double b)
{
    return std::abs(a / b - 1.0);
}

std::array<double, 4> truth(const SeaParams& p = {})
{
    const Vec<double> d = output_locked_tf(p).den();
    return {d(3), d(2), d(1), d(0)};
}

Errc code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::invalid_argument;
}

} // namespace

TEST(FitTf, NoiselessRoundTrip)
{
    const ThirdOrderFit fit = fit_third_order(sample_response(output_locked_tf(SeaParams{}), grid));
    const auto a = truth();
    for (int i = 0; i < 4; ++i)
        EXPECT_LT(rel(fit.A[i], a[i]), 1e-6) << "A" << i;
    EXPECT_LT(fit.residual, 1e-9);
}

TEST(FitTf, UniformWeightingAlsoExact)
{
    FitOptions opt;
    opt.weighting = FitWeighting::uniform;
    const ThirdOrderFit fit = fit_third_order(sample_response(output_locked_tf(SeaParams{}), grid), opt);
    const auto a = truth();
    for (int i = 0; i < 4; ++i)
        EXPECT_LT(rel(fit.A[i], a[i]), 1e-6) << "A" << i;
}

TEST(FitTf, RoundTripOverParameterGrid)
{
    for (double jm : {0.7, 1.0, 1.4}) {
        for (double ks : {0.5, 1.0, 2.0}) {
            SeaParams p;
            p.motor.J_m *= jm;
            p.K_s *= ks;
            const ThirdOrderFit fit = fit_third_order(sample_response(output_locked_tf(p), grid));
            const auto a = truth(p);
            for (int i = 0; i < 4; ++i)
                EXPECT_LT(rel(fit.A[i], a[i]), 1e-6) << jm << " " << ks << " A" << i;
        }
    }
}

TEST(FitTf, NoisyMonteCarlo)
{
    const FreqDataset clean = sample_response(output_locked_tf(SeaParams{}), grid);
    const auto a = truth();
    int good = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const ThirdOrderFit fit = fit_third_order(with_multiplicative_noise(clean, 0.01, seed));
        bool ok = true;
        for (int i = 0; i < 4; ++i)
            ok = ok && rel(fit.A[i], a[i]) < 0.02;
        good += ok ? 1 : 0;
    }
    EXPECT_GE(good, 95);
}

TEST(FitTf, TooFewPoints)
{
    const FreqDataset d = sample_response(output_locked_tf(SeaParams{}), std::vector<double>{1.0, 10.0, 100.0});
    EXPECT_EQ(code_of([&] { fit_third_order(d); }), Errc::ill_posed_fit);
}

TEST(FitTf, NarrowBandRejected)
{
    const FreqDataset d = sample_response(output_locked_tf(SeaParams{}), log_space(10.0, 20.0, 20));
    EXPECT_EQ(code_of([&] { fit_third_order(d); }), Errc::ill_posed_fit);
}

TEST(FitTf, ModelRebuildsTransferFunction)
{
    const TransferFunction g = output_locked_tf(SeaParams{});
    const ThirdOrderFit fit = fit_third_order(sample_response(g, grid));
    for (double w : {1.0, 50.0, 2000.0})
        EXPECT_LT(std::abs(freq_response(fit.model(), w) / freq_response(g, w) - 1.0), 1e-8);
}

TEST(FitTf, MagnitudeOnlyRoundTrip)
{
    const SeaParams p;
    const TransferFunction g = output_locked_tf(p);
    const std::vector<double> w = log_space(0.5, 150.0, 60);
    std::vector<double> mag;
    for (double x : w)
        mag.push_back(std::abs(freq_response(g, x)));
    const auto a = truth();
    const ThirdOrderFit fit = fit_third_order_magnitude(w, mag, a[3]);
    for (int i = 0; i < 3; ++i)
        EXPECT_LT(rel(fit.A[i], a[i]), 1e-6) << "A" << i;
}

TEST(FitTf, PolarDatasetAgrees)
{
    const TransferFunction g = output_locked_tf(SeaParams{});
    std::vector<double> mag, ph;
    for (double w : grid) {
        mag.push_back(std::abs(freq_response(g, w)));
        ph.push_back(std::arg(freq_response(g, w)));
    }
    const FreqDataset d = FreqDataset::from_polar(grid, mag, ph);
    const ThirdOrderFit fit = fit_third_order(d);
    EXPECT_LT(rel(fit.A[0], truth()[0]), 1e-6);
}

TEST(SelectNominal, IdenticalModels)
{
    const TransferFunction g = output_locked_tf(SeaParams{});
    const std::vector<TransferFunction> models{g, g, g};
    const NominalSelection s = select_nominal(models, grid);
    EXPECT_LT(s.max_mismatch, 1e-15);
    for (double e : s.envelope)
        EXPECT_LT(e, 1e-15);
}

TEST(SelectNominal, ScaledFamilyPicksMiddle)
{
    const TransferFunction g = output_locked_tf(SeaParams{});
    const std::vector<TransferFunction> models{g, 1.1 * g, 0.9 * g};
    const NominalSelection s = select_nominal(models, grid);
    EXPECT_EQ(s.index, 0u);
    EXPECT_NEAR(s.max_mismatch, 0.1, 1e-12);
}

TEST(SelectNominal, InertiaFamilyMatchesBruteForce)
{
    std::vector<TransferFunction> models;
    for (double k : {0.8, 1.0, 1.25}) {
        SeaParams p;
        p.motor.J_m *= k;
        models.push_back(output_locked_tf(p));
    }
    const NominalSelection s = select_nominal(models, grid);
    std::size_t best = 0;
    double best_cost = 1e300;
    for (std::size_t n = 0; n < models.size(); ++n) {
        double cost = 0.0;
        for (const auto& m : models)
            for (double w : grid)
                cost = std::max(cost, std::abs(freq_response(m, w) / freq_response(models[n], w) - 1.0));
        if (cost < best_cost) {
            best_cost = cost;
            best = n;
        }
    }
    EXPECT_EQ(s.index, best);
    EXPECT_NEAR(s.max_mismatch, best_cost, 1e-12);
}

TEST(SelectNominal, InvariantToCommonScale)
{
    std::vector<TransferFunction> models, scaled;
    for (double k : {0.7, 1.0, 1.2, 1.5}) {
        SeaParams p;
        p.motor.J_m *= k;
        p.K_s *= 2.0 - k;
        models.push_back(output_locked_tf(p));
        scaled.push_back(-3.7 * output_locked_tf(p));
    }
    const NominalSelection a = select_nominal(models, grid);
    const NominalSelection b = select_nominal(scaled, grid);
    EXPECT_EQ(a.index, b.index);
    EXPECT_NEAR(a.max_mismatch, b.max_mismatch, 1e-12);
}

TEST(SelectNominal, Errors)
{
    const TransferFunction g = output_locked_tf(SeaParams{});
    const std::vector<TransferFunction> one{g};
    EXPECT_EQ(code_of([&] { select_nominal(one, grid); }), Errc::invalid_argument);
    const std::vector<TransferFunction> with_zero{g, TransferFunction({1.0, 0.0}, {1.0, 1.0})};
    const std::vector<double> w{0.0, 1.0};
    EXPECT_EQ(code_of([&] { select_nominal(with_zero, w); }), Errc::singular_nominal);
}

TEST(FitThermal, NoiselessRoundTrip)
{
    const ThermalParams p;
    const ThermalStepDataset d = simulate_thermal_step(p, 1.0, 1200.0, 0.1);
    const ThermalFit fit = fit_thermal_step(d, p);
    EXPECT_LT(rel(fit.params.R1, p.R1), 0.01);
    EXPECT_LT(rel(fit.params.R2, p.R2), 0.01);
    EXPECT_LT(rel(fit.params.R3, p.R3), 0.01);
    EXPECT_LT(rel(fit.params.tau1, p.tau1), 0.02);
    EXPECT_LT(rel(fit.params.tau2, p.tau2), 0.02);
    EXPECT_TRUE(fit.settled);
    EXPECT_FALSE(fit.tau3_lower_bound);
}

TEST(FitThermal, ShortRecordFlagsTau3AndSettling)
{
    const ThermalParams p;
    const ThermalFit fit = fit_thermal_step(simulate_thermal_step(p, 1.0, 60.0, 0.1), p);
    EXPECT_TRUE(fit.tau3_lower_bound);
    EXPECT_FALSE(fit.settled);
    EXPECT_FALSE(fit.warnings.empty());
}

TEST(FitThermal, ZeroCurrentRejected)
{
    const ThermalParams p;
    const ThermalStepDataset d = simulate_thermal_step(p, 0.0, 600.0, 0.1);
    EXPECT_EQ(code_of([&] { fit_thermal_step(d, p); }), Errc::ill_posed_fit);
}

TEST(FitThermal, NoisyR1)
{
    const ThermalParams p;
    const ThermalStepDataset clean = simulate_thermal_step(p, 1.0, 1200.0, 0.1);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n(0.0, 0.1);
        ThermalStepDataset d = clean;
        for (std::size_t k = 0; k < d.t.size(); ++k) {
            d.T_W[k] += n(rng);
            d.T_H[k] += n(rng);
            d.T_M[k] += n(rng);
        }
        EXPECT_LT(rel(fit_thermal_step(d, p).params.R1, p.R1), 0.05) << seed;
    }
}

TEST(Helpers, LogSpace)
{
    const auto v = log_space(1.0, 1000.0, 4);
    ASSERT_EQ(v.size(), 4u);
    EXPECT_NEAR(v[1], 10.0, 1e-12);
    EXPECT_NEAR(v[3], 1000.0, 1e-9);
}

TEST(Helpers, NoiseIsSeeded)
{
    const FreqDataset clean = sample_response(output_locked_tf(SeaParams{}), grid);
    const FreqDataset a = with_multiplicative_noise(clean, 0.01, 42);
    const FreqDataset b = with_multiplicative_noise(clean, 0.01, 42);
    const FreqDataset c = with_multiplicative_noise(clean, 0.01, 43);
    EXPECT_EQ(a.response, b.response);
    EXPECT_NE(a.response, c.response);
}
