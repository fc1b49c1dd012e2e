#include "sea/thermo.hpp"

#include "sea/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace sea;

namespace {

ThermalState integrate(ThermalState s, double i_m, double duration, double h, const ThermalParams& p)
{
    const long n = std::lround(duration / h);
    for (long k = 0; k < n; ++k)
        s = thermal_step(s, i_m * i_m, h, p);
    return s;
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

TEST(ThermalParams, Validation)
{
    EXPECT_NO_THROW(ThermalParams{}.validate());
    ThermalParams p;
    p.tau1 = 20.0;
    EXPECT_THROW(p.validate(), Error);
    p = {};
    p.T_MAX = 20.0;
    EXPECT_THROW(p.validate(), Error);
    p = {};
    p.R2 = 0.0;
    EXPECT_THROW(p.validate(), Error);
}

TEST(JoulePower, Values)
{
    const ThermalParams p;
    EXPECT_EQ(joule_power(0.0, 80.0, p), 0.0);
    EXPECT_DOUBLE_EQ(joule_power(1.0, 25.0, p), 6.840);
    EXPECT_NEAR(joule_power(1.0, 125.0, p), 6.840 * 1.393, 1e-12);
}

TEST(Derivatives, EquilibriumAtAmbient)
{
    const ThermalParams p;
    const ThermalState d = thermal_derivatives(ThermalState::ambient(p), 0.0, p);
    EXPECT_EQ(d.T_W, 0.0);
    EXPECT_EQ(d.T_H, 0.0);
    EXPECT_EQ(d.T_M, 0.0);
}

TEST(Derivatives, HotWindingCools)
{
    const ThermalParams p;
    EXPECT_LT(thermal_derivatives({60.0, 25.0, 25.0}, 0.0, p).T_W, 0.0);
}

TEST(SteadyState, ClosedFormValues)
{
    const ThermalParams p;
    EXPECT_EQ(steady_state_winding_temp(0.0, p), 25.0);
    EXPECT_NEAR(steady_state_winding_temp(1.0, p), 83.7495933, 1e-6);
}

TEST(SteadyState, RunawayAboveThreshold)
{
    const ThermalParams p;
    EXPECT_EQ(code_of([&] { steady_state_winding_temp(2.32, p); }), Errc::thermal_runaway);
    EXPECT_NO_THROW(steady_state_winding_temp(2.30, p));
}

TEST(SteadyState, MonotoneInCurrent)
{
    const ThermalParams p;
    double prev = steady_state_winding_temp(0.0, p);
    for (double i = 0.05; i < 2.3; i += 0.05) {
        const double t = steady_state_winding_temp(i, p);
        EXPECT_GT(t, prev);
        EXPECT_EQ(steady_state_winding_temp(-i, p), t);
        prev = t;
    }
}

TEST(SteadyState, LongIntegrationConverges)
{
    const ThermalParams p;
    for (double i : {0.5, 1.0, 1.2}) {
        const ThermalState s = integrate(ThermalState::ambient(p), i, 4000.0, 0.01, p);
        EXPECT_NEAR(s.T_W, steady_state_winding_temp(i, p), 0.1) << i;
    }
}

TEST(SteadyState, ElectronicsHeatAddsThroughR3)
{
    ThermalParams p;
    p.i_source = 10.0;
    EXPECT_NEAR(steady_state_winding_temp(0.0, p), 25.0 + 10.0 * p.R3, 1e-12);
}

TEST(NominalCurrent, Oracle)
{
    const ThermalParams p;
    const double i_n = nominal_current(p);
    EXPECT_NEAR(i_n, 1.2479116, 1e-6);
    EXPECT_NEAR(steady_state_winding_temp(i_n, p), 130.0, 1e-6);
}

TEST(NominalCurrent, ColderAmbientAllowsMore)
{
    ThermalParams cold;
    cold.T_A = 15.0;
    EXPECT_GT(nominal_current(cold), nominal_current(ThermalParams{}));
}

TEST(NominalCurrent, NoResistanceDrift)
{
    ThermalParams p;
    p.alpha_cu = 0.0;
    EXPECT_NEAR(nominal_current(p), std::sqrt(105.0 / (p.R_A * p.R_total())), 1e-14);
}

TEST(NominalCurrent, ZeroHeadroom)
{
    ThermalParams p;
    p.i_source = 110.0 / p.R3;
    EXPECT_EQ(code_of([&] { nominal_current(p); }), Errc::zero_headroom);
}

TEST(OnTime, AnalyticValues)
{
    EXPECT_NEAR(*on_time(std::sqrt(2.0), 1.49), 1.49 * std::log(2.0), 1e-12);
    EXPECT_NEAR(*on_time(std::sqrt(2.0), 1.49), 1.0327893, 1e-6);
    EXPECT_NEAR(*on_time(2.0, 1.49), 0.4286463, 1e-6);
    EXPECT_FALSE(on_time(1.0, 1.49).has_value());
    EXPECT_FALSE(on_time(0.5, 1.49).has_value());
}

TEST(Overload, BudgetAndCap)
{
    const ThermalParams p;
    const double i_n = nominal_current(p);
    // K_o <= 1: steady-state safe.
    const OverloadBudget safe = overload_budget(0.5 * i_n, 60.0, p);
    EXPECT_LT(safe.K_o, 1.0);
    EXPECT_FALSE(safe.t_on.has_value());

    // Barely above 1 the raw on-time exceeds 5 tau1 and is capped.
    const double scale = std::sqrt((p.T_MAX - p.T_A) * p.R1 / ((p.T_MAX - 60.0) * p.R_total()));
    const OverloadBudget near = overload_budget(1.002 * i_n / scale, 60.0, p);
    EXPECT_NEAR(near.K_o, 1.002, 1e-12);
    EXPECT_TRUE(near.capped);
    EXPECT_DOUBLE_EQ(*near.t_on, 5.0 * p.tau1);

    const OverloadBudget two = overload_budget(2.0 * i_n / scale, 60.0, p);
    EXPECT_FALSE(two.capped);
    EXPECT_NEAR(*two.t_on, 1.49 * std::log(4.0 / 3.0), 1e-12);
    EXPECT_NEAR(two.t_beta, 60.0 + 4.0 * 70.0, 1e-9);
}

TEST(Overload, OnTimeDecreasesWithCurrent)
{
    const ThermalParams p;
    double prev = 1e9;
    for (double i = 1.0; i < 6.0; i += 0.25) {
        const OverloadBudget b = overload_budget(i, 60.0, p);
        if (!b.t_on)
            continue;
        EXPECT_LE(*b.t_on, prev);
        if (!b.capped)
            EXPECT_LT(*b.t_on, prev);
        prev = *b.t_on;
    }
}

TEST(Overload, NoHeadroom)
{
    EXPECT_EQ(code_of([] { overload_budget(2.0, 130.0, ThermalParams{}); }), Errc::no_overload_headroom);
}

TEST(OverloadTransient, Shape)
{
    const ThermalParams p;
    EXPECT_EQ(overload_transient(60.0, 200.0, 0.0, p), 60.0);
    EXPECT_NEAR(overload_transient(60.0, 200.0, 100.0 * p.tau1, p), 200.0, 1e-9);
    EXPECT_NEAR(overload_transient(60.0, 200.0, p.tau1, p), 60.0 + 140.0 * (1.0 - std::exp(-1.0)), 1e-12);
    EXPECT_THROW(overload_transient(60.0, 200.0, -1.0, p), Error);
}

TEST(Overload, TransientCrossesLimitAtOnTime)
{
    const ThermalParams p;
    const OverloadBudget b = overload_budget(2.5, 60.0, p);
    ASSERT_TRUE(b.t_on && !b.capped);
    EXPECT_NEAR(overload_transient(60.0, b.t_beta, *b.t_on, p), p.T_MAX, 1e-9);
}

TEST(Energy, BalanceUnderVaryingCurrent)
{
    ThermalParams p;
    p.i_source = 0.5;
    ThermalState s = ThermalState::ambient(p);
    const double h = 0.01;
    double heat_in = 0.0, heat_out = 0.0;
    for (int k = 0; k < 60000; ++k) {
        const double t = k * h;
        const double i = 1.5 * std::sin(0.7 * t) + (t > 300.0 ? 0.0 : 0.8);
        // Trapezoid estimate of the boundary flows; tolerance covers it.
        const double in0 = joule_power(i, s.T_W, p) + p.i_source;
        const double out0 = (s.T_M - p.T_A) / p.R3;
        const ThermalState next = thermal_step(s, i * i, h, p);
        heat_in += 0.5 * h * (in0 + joule_power(i, next.T_W, p) + p.i_source);
        heat_out += 0.5 * h * (out0 + (next.T_M - p.T_A) / p.R3);
        s = next;
    }
    EXPECT_LT(std::abs(stored_energy(s, p) - (heat_in - heat_out)), 1e-3 * heat_in);
}

TEST(Cooling, MonotoneWithoutUndershoot)
{
    const ThermalParams p;
    ThermalState s = integrate(ThermalState::ambient(p), 1.0, 100.0, 0.01, p);
    double prev = s.T_W;
    for (int k = 0; k < 200000; ++k) {
        s = thermal_step(s, 0.0, 0.01, p);
        EXPECT_LE(s.T_W, prev + 1e-12);
        EXPECT_GE(s.T_W, p.T_A - 1e-9);
        prev = s.T_W;
    }
    EXPECT_NEAR(s.T_W, p.T_A, 0.05);
}

TEST(StepResponse, WindingRisesFastestAndNodesOrdered)
{
    const ThermalParams p;
    const ThermalState s = integrate(ThermalState::ambient(p), 1.0, 5.0, 0.01, p);
    EXPECT_GT(s.T_W, s.T_H);
    EXPECT_GT(s.T_H, s.T_M);
    EXPECT_GT(s.T_M, p.T_A);
}

TEST(Estimator, ZeroForcingStaysAtHousing)
{
    const ThermalParams p;
    WindingTempEstimator est(p, 40.0, 40.0);
    for (int k = 0; k < 1000; ++k)
        EXPECT_EQ(est.update(40.0, 0.0, 0.01), 40.0);
}

TEST(Estimator, ConstantPowerSettlesAtR1Drop)
{
    ThermalParams p;
    p.alpha_cu = 0.0;
    p.R_A = 1.0; // 1 A -> 1 W
    WindingTempEstimator est(p, 30.0, 30.0);
    double tw = 0.0;
    for (int k = 0; k < 5000; ++k)
        tw = est.update(30.0, 1.0, 0.01);
    EXPECT_NEAR(tw - 30.0, p.R1, 1e-9);
}

TEST(Estimator, SamplingAdequacy)
{
    const ThermalParams p;
    WindingTempEstimator est(p);
    try {
        est.update(25.0, 1.0, p.tau1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::sampling_inadequate);
    }
    EXPECT_NO_THROW(est.update(25.0, 1.0, p.tau1 / 5.0));
}

TEST(Estimator, RecursionEqualsConvolution)
{
    // Piecewise-constant power, alpha = 0 so P does not depend on the estimate.
    ThermalParams p;
    p.alpha_cu = 0.0;
    const double dt = 0.05;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> amps(0.0, 2.0);
    std::vector<double> current(400);
    for (double& i : current)
        i = amps(rng);
    WindingTempEstimator est(p, 25.0, 25.0);
    const double c1 = p.C1();
    for (std::size_t k = 0; k < current.size(); ++k) {
        const double tw = est.update(25.0, current[k], dt);
        // Exact integral of g(t) = exp(-t/tau1)/C1 against piecewise-constant P.
        double conv = 0.0;
        for (std::size_t j = 0; j <= k; ++j) {
            const double t0 = static_cast<double>(k - j) * dt;
            const double pj = p.R_A * current[j] * current[j];
            conv += pj / c1 * p.tau1 * (std::exp(-t0 / p.tau1) - std::exp(-(t0 + dt) / p.tau1));
        }
        EXPECT_NEAR(tw - 25.0, conv, 1e-6) << k;
    }
}

TEST(Estimator, HousingCompanionTracksNetwork)
{
    const ThermalParams p;
    WindingTempEstimator est(p);
    ThermalState s = ThermalState::ambient(p);
    const double dt = 0.01;
    double worst = 0.0;
    for (int k = 0; k < 20000; ++k) {
        const double i = 0.8;
        s = thermal_step(s, i * i, dt, p);
        const double tw = est.update(i, dt);
        worst = std::max(worst, std::abs(tw - s.T_W));
    }
    // Without a housing sensor the estimate is only indicative.
    EXPECT_LT(worst, 10.0);
}
