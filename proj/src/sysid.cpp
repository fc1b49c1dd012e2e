#include "sea/sysid.hpp"

#include "sea/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace sea {

namespace {

using cd = std::complex<double>;

void require_increasing(std::span<const double> x, const char* what)
{
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!std::isfinite(x[k]) || (k > 0 && !(x[k] > x[k - 1]))) {
            std::ostringstream msg;
            msg << what << " must be finite and strictly increasing (sample " << k << ")";
            throw Error(Errc::invalid_argument, msg.str());
        }
    }
}

void check_coverage(std::span<const double> omega, std::size_t min_samples, double min_decades)
{
    if (omega.size() < min_samples) {
        std::ostringstream msg;
        msg << "fit needs at least " << min_samples << " frequency samples, got " << omega.size();
        throw Error(Errc::ill_posed_fit, msg.str());
    }
    require_increasing(omega, "frequency");
    if (!(omega.front() > 0.0))
        throw Error(Errc::ill_posed_fit, "frequencies must be positive");
    const double decades = std::log10(omega.back() / omega.front());
    if (decades < min_decades) {
        std::ostringstream msg;
        msg << "frequency span of " << decades << " decades is below the " << min_decades << " needed";
        throw Error(Errc::ill_posed_fit, msg.str());
    }
}

// Trapezoid share of each sample in log frequency, normalised to mean 1.
std::vector<double> sample_weights(std::span<const double> omega, FitWeighting weighting)
{
    const std::size_t n = omega.size();
    std::vector<double> w(n, 1.0);
    if (weighting == FitWeighting::uniform || n < 2)
        return w;
    for (std::size_t k = 0; k < n; ++k) {
        const double lo = std::log(omega[k == 0 ? 0 : k - 1]);
        const double hi = std::log(omega[k + 1 == n ? n - 1 : k + 1]);
        w[k] = 0.5 * (hi - lo);
    }
    double mean = 0.0;
    for (double v : w)
        mean += v;
    mean /= static_cast<double>(n);
    for (double& v : w)
        v /= mean;
    return w;
}

cd denominator(const std::array<double, 4>& A, double omega)
{
    const cd s(0.0, omega);
    return ((A[3] * s + A[2]) * s + A[1]) * s + A[0];
}

// Column-scaled least squares; rank loss is an ill-posed fit.
Eigen::VectorXd solve_scaled(Eigen::MatrixXd M, const Eigen::VectorXd& rhs)
{
    Eigen::VectorXd scale = M.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
        if (!(scale(j) > 0.0) || !std::isfinite(scale(j)))
            throw Error(Errc::ill_posed_fit, "regression has an empty or non-finite column");
        M.col(j) /= scale(j);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    qr.setThreshold(1e-10);
    if (qr.rank() < M.cols()) {
        std::ostringstream msg;
        msg << "regression is rank deficient (rank " << qr.rank() << " of " << M.cols()
            << "); widen the frequency coverage";
        throw Error(Errc::ill_posed_fit, msg.str());
    }
    return qr.solve(rhs).cwiseQuotient(scale);
}

} // namespace

FreqDataset FreqDataset::from_polar(std::vector<double> omega, std::span<const double> magnitude,
                                    std::span<const double> phase_rad)
{
    if (omega.size() != magnitude.size() || omega.size() != phase_rad.size())
        throw Error(Errc::invalid_argument, "frequency, magnitude and phase columns differ in length");
    FreqDataset d;
    d.omega = std::move(omega);
    d.response.reserve(magnitude.size());
    for (std::size_t k = 0; k < magnitude.size(); ++k)
        d.response.push_back(std::polar(magnitude[k], phase_rad[k]));
    return d;
}

void FreqDataset::validate(std::size_t min_samples, double min_decades) const
{
    if (omega.size() != response.size())
        throw Error(Errc::invalid_argument, "frequency and response columns differ in length");
    check_coverage(omega, min_samples, min_decades);
    for (const cd& h : response) {
        if (!std::isfinite(h.real()) || !std::isfinite(h.imag()) || h == cd(0.0))
            throw Error(Errc::ill_posed_fit, "response samples must be finite and nonzero");
    }
}

TransferFunction ThirdOrderFit::model() const
{
    return TransferFunction({gain}, {A[3], A[2], A[1], A[0]});
}

ThirdOrderFit fit_third_order(const FreqDataset& data, const FitOptions& options)
{
    data.validate();
    if (!(options.gain > 0.0))
        throw Error(Errc::invalid_argument, "gain prior must be positive");
    const std::size_t n = data.omega.size();
    const std::vector<double> w = sample_weights(data.omega, options.weighting);
    const double g = options.gain;

    // |H D_prev| starts at g everywhere, i.e. plain equation error.
    std::vector<double> hd(n, g);
    ThirdOrderFit fit;
    fit.gain = g;
    for (int it = 1; it <= options.max_iterations; ++it) {
        Eigen::MatrixXd M(2 * n, 4);
        Eigen::VectorXd rhs(2 * n);
        for (std::size_t k = 0; k < n; ++k) {
            const double wk = std::sqrt(w[k]) / hd[k];
            const cd s(0.0, data.omega[k]);
            cd basis = wk * data.response[k];
            for (int j = 0; j < 4; ++j) {
                M(2 * k, j) = basis.real();
                M(2 * k + 1, j) = basis.imag();
                basis *= s;
            }
            rhs(2 * k) = wk * g;
            rhs(2 * k + 1) = 0.0;
        }
        const Eigen::VectorXd a = solve_scaled(std::move(M), rhs);
        std::array<double, 4> next{a(0), a(1), a(2), a(3)};
        double change = 0.0;
        for (int j = 0; j < 4; ++j)
            change = std::max(change, std::abs(next[j] - fit.A[j]) / std::abs(next[j]));
        fit.A = next;
        fit.iterations = it;
        for (std::size_t k = 0; k < n; ++k)
            hd[k] = std::abs(data.response[k] * denominator(fit.A, data.omega[k]));
        if (change < options.tolerance)
            break;
    }

    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const cd model = g / denominator(fit.A, data.omega[k]);
        sum += std::norm((data.response[k] - model) / data.response[k]);
    }
    fit.residual = std::sqrt(sum / static_cast<double>(n));
    return fit;
}

ThirdOrderFit fit_third_order_magnitude(std::span<const double> omega, std::span<const double> magnitude,
                                        double a_3, const FitOptions& options)
{
    if (omega.size() != magnitude.size())
        throw Error(Errc::invalid_argument, "frequency and magnitude columns differ in length");
    check_coverage(omega, 8, 1.0);
    if (!(a_3 > 0.0) || !(options.gain > 0.0))
        throw Error(Errc::invalid_argument, "A3 and the gain prior must be positive");
    for (double m : magnitude) {
        if (!(m > 0.0) || !std::isfinite(m))
            throw Error(Errc::ill_posed_fit, "magnitude samples must be finite and positive");
    }
    const std::size_t n = omega.size();
    const std::vector<double> w = sample_weights(omega, options.weighting);
    const double g = options.gain;

    // |D(jw)|^2 = c0 + c1 w^2 + c2 w^4 + A3^2 w^6 with
    // c0 = A0^2, c1 = A1^2 - 2 A0 A2, c2 = A2^2 - 2 A1 A3.
    Eigen::MatrixXd M(n, 3);
    Eigen::VectorXd rhs(n);
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double x = omega[k] * omega[k];
        y[k] = g * g / (magnitude[k] * magnitude[k]);
        const double wk = std::sqrt(w[k]) / y[k];
        M(k, 0) = wk;
        M(k, 1) = wk * x;
        M(k, 2) = wk * x * x;
        rhs(k) = wk * (y[k] - a_3 * a_3 * x * x * x);
    }
    const Eigen::VectorXd c = solve_scaled(std::move(M), rhs);
    if (!(c(0) > 0.0))
        throw Error(Errc::ill_posed_fit, "magnitude data imply a non-positive DC denominator");
    const double a0 = std::sqrt(c(0));

    auto cost = [&](const std::array<double, 4>& A) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double r = g / std::abs(denominator(A, omega[k])) / magnitude[k] - 1.0;
            s += w[k] * r * r;
        }
        return s;
    };

    // A1 solves (A1^2 - c1)^2 - 8 A0^2 A3 A1 - 4 A0^2 c2 = 0.
    Vec<double> quartic(5);
    quartic << 1.0, 0.0, -2.0 * c(1), -8.0 * a0 * a0 * a_3, c(1) * c(1) - 4.0 * a0 * a0 * c(2);
    const Vec<cd> roots = poly::roots<double>(quartic);
    std::optional<std::array<double, 4>> best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (const cd& r : roots) {
        if (std::abs(r.imag()) > 1e-6 * std::abs(r) || !(r.real() > 0.0))
            continue;
        const double a1 = r.real();
        const double a2 = (a1 * a1 - c(1)) / (2.0 * a0);
        if (!(a2 > 0.0))
            continue;
        const std::array<double, 4> A{a0, a1, a2, a_3};
        if (const double v = cost(A); v < best_cost) {
            best_cost = v;
            best = A;
        }
    }
    if (!best)
        throw Error(Errc::ill_posed_fit, "no stable third-order denominator matches the magnitude data");

    // Gauss-Newton polish on the relative magnitude error, in relative units.
    std::array<double, 4> A = *best;
    for (int it = 0; it < 50; ++it) {
        Eigen::MatrixXd J(n, 3);
        Eigen::VectorXd r(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double om = omega[k], x = om * om;
            const double re = A[0] - A[2] * x, im = A[1] * om - A[3] * om * x;
            const double d = std::hypot(re, im);
            const double model = g / d;
            const double sw = std::sqrt(w[k]);
            r(k) = sw * (model / magnitude[k] - 1.0);
            const double dm = -model / (d * d) / magnitude[k] * sw; // d(model/mag)/d(|D|) * 1/|D|
            J(k, 0) = dm * re * A[0];
            J(k, 1) = dm * im * om * A[1];
            J(k, 2) = -dm * re * x * A[2];
        }
        const Eigen::Vector3d step = J.colPivHouseholderQr().solve(-r);
        std::array<double, 4> trial = A;
        for (int j = 0; j < 3; ++j)
            trial[j] *= 1.0 + step(j);
        const double before = cost(A);
        const double after = cost(trial);
        if (!(after < before))
            break;
        A = trial;
        if (step.cwiseAbs().maxCoeff() < 1e-12)
            break;
    }

    ThirdOrderFit fit;
    fit.gain = g;
    fit.A = A;
    fit.iterations = 1;
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = g / std::abs(denominator(A, omega[k])) / magnitude[k] - 1.0;
        sum += r * r;
    }
    fit.residual = std::sqrt(sum / static_cast<double>(n));
    return fit;
}

NominalSelection select_nominal(const Mat<std::complex<double>>& responses)
{
    const Eigen::Index m = responses.rows(), n = responses.cols();
    if (m < 2)
        throw Error(Errc::invalid_argument, "nominal selection needs at least two candidates");
    if (n < 1)
        throw Error(Errc::invalid_argument, "nominal selection needs at least one frequency");
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const cd h = responses(i, k);
            if (!std::isfinite(h.real()) || !std::isfinite(h.imag()) || std::abs(h) == 0.0) {
                std::ostringstream msg;
                msg << "candidate " << i << " has zero or non-finite response at frequency sample " << k;
                throw Error(Errc::singular_nominal, msg.str());
            }
        }
    }
    NominalSelection best;
    best.max_mismatch = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < m; ++c) {
        std::vector<double> envelope(static_cast<std::size_t>(n), 0.0);
        for (Eigen::Index i = 0; i < m; ++i) {
            if (i == c)
                continue;
            for (Eigen::Index k = 0; k < n; ++k) {
                const double delta = std::abs(responses(i, k) / responses(c, k) - 1.0);
                envelope[k] = std::max(envelope[k], delta);
            }
        }
        const double worst = *std::max_element(envelope.begin(), envelope.end());
        if (worst < best.max_mismatch) {
            best.index = static_cast<std::size_t>(c);
            best.max_mismatch = worst;
            best.envelope = std::move(envelope);
        }
    }
    return best;
}

NominalSelection select_nominal(std::span<const TransferFunction> models, std::span<const double> omegas)
{
    Mat<cd> responses(static_cast<Eigen::Index>(models.size()), static_cast<Eigen::Index>(omegas.size()));
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t k = 0; k < omegas.size(); ++k) {
            try {
                responses(i, k) = freq_response(models[i], omegas[k]);
            } catch (const Error& e) {
                throw Error(Errc::singular_nominal, e.what());
            }
        }
    }
    return select_nominal(responses);
}

void ThermalStepDataset::validate() const
{
    const std::size_t n = t.size();
    if (T_W.size() != n || T_H.size() != n || T_M.size() != n)
        throw Error(Errc::invalid_argument, "thermal step columns differ in length");
    if (n < 10)
        throw Error(Errc::insufficient_data, "thermal step record needs at least 10 samples");
    require_increasing(t, "time");
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(T_W[k]) || !std::isfinite(T_H[k]) || !std::isfinite(T_M[k]))
            throw Error(Errc::invalid_argument, "thermal step record has non-finite temperatures");
    }
}

ThermalFit fit_thermal_step(const ThermalStepDataset& data, const ThermalParams& priors)
{
    data.validate();
    if (data.i_m == 0.0)
        throw Error(Errc::ill_posed_fit, "zero step current gives no Joule excitation; resistances are unidentifiable");
    const std::size_t n = data.t.size();
    const double duration = data.t.back() - data.t.front();

    auto window_mean = [&](const std::vector<double>& x, double from, double to) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const double rel = (data.t[k] - data.t.front()) / duration;
            if (rel >= from && rel <= to) {
                sum += x[k];
                ++count;
            }
        }
        return count ? sum / static_cast<double>(count) : x.back();
    };

    const double tw = window_mean(data.T_W, 0.95, 1.0);
    const double th = window_mean(data.T_H, 0.95, 1.0);
    const double tm = window_mean(data.T_M, 0.95, 1.0);

    ThermalFit fit;
    fit.params = priors;
    ThermalParams& p = fit.params;

    double drift = 0.0;
    for (const auto* node : {&data.T_W, &data.T_H, &data.T_M}) {
        const double rise = window_mean(*node, 0.95, 1.0) - node->front();
        if (rise != 0.0)
            drift = std::max(drift, std::abs(window_mean(*node, 0.85, 0.9) - window_mean(*node, 0.95, 1.0)) /
                                        std::abs(rise));
    }
    if (duration < 5.0 * priors.tau2 || drift > 5e-3) {
        fit.settled = false;
        std::ostringstream msg;
        msg << "record has not settled (late drift " << drift * 100.0
            << "% of the rise); steady-state resistances are biased low";
        fit.warnings.push_back(msg.str());
    }

    const double power = joule_power(data.i_m, tw, priors);
    p.R1 = (tw - th) / power;
    p.R2 = (th - tm) / power;
    p.R3 = (tm - priors.T_A) / (power + priors.i_source);
    if (!(p.R1 > 0.0 && p.R2 > 0.0 && p.R3 > 0.0))
        throw Error(Errc::ill_posed_fit, "steady-state levels are not ordered winding > housing > proximity > ambient");

    // Integrated node balances: C_k (T_k(t) - T_k(0)) = integral of net inflow.
    std::array<double, 3> fy{}, ff{}, yy{};
    std::array<std::vector<double>, 3> F, Y;
    std::array<double, 3> acc{};
    std::array<double, 3> prev_flow{};
    for (std::size_t k = 0; k < n; ++k) {
        const double q_wh = (data.T_W[k] - data.T_H[k]) / p.R1;
        const double q_hm = (data.T_H[k] - data.T_M[k]) / p.R2;
        const double q_ma = (data.T_M[k] - p.T_A) / p.R3;
        const std::array<double, 3> flow{joule_power(data.i_m, data.T_W[k], p) - q_wh, q_wh - q_hm,
                                         q_hm + p.i_source - q_ma};
        const std::array<double, 3> rise{data.T_W[k] - data.T_W[0], data.T_H[k] - data.T_H[0],
                                         data.T_M[k] - data.T_M[0]};
        for (int j = 0; j < 3; ++j) {
            if (k > 0)
                acc[j] += 0.5 * (flow[j] + prev_flow[j]) * (data.t[k] - data.t[k - 1]);
            prev_flow[j] = flow[j];
            F[j].push_back(acc[j]);
            Y[j].push_back(rise[j]);
            fy[j] += acc[j] * rise[j];
            ff[j] += acc[j] * acc[j];
            yy[j] += rise[j] * rise[j];
        }
    }
    std::array<double, 3> cap{};
    for (int j = 0; j < 3; ++j) {
        if (!(fy[j] > 0.0))
            throw Error(Errc::ill_posed_fit, "integrated heat flow does not explain the temperature rise");
        // Least squares for 1/C in rise = F / C.
        const double inv_c = fy[j] / ff[j];
        cap[j] = 1.0 / inv_c;
        double sse = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double r = Y[j][k] - F[j][k] * inv_c;
            sse += r * r;
        }
        fit.node_rmse[j] = std::sqrt(sse / static_cast<double>(n));
    }
    p.tau1 = p.R1 * cap[0];
    p.tau2 = p.R2 * cap[1];
    p.tau3 = p.R3 * cap[2];
    fit.nrmse = fit.node_rmse[0] / std::max(std::abs(tw - data.T_W.front()), 1e-12);

    if (duration < 3.0 * p.tau3) {
        fit.tau3_lower_bound = true;
        fit.warnings.push_back("record is shorter than 3 tau3; tau3 is a lower bound");
    }
    if (!(p.tau1 < p.tau2))
        fit.warnings.push_back("fitted tau1 is not below tau2");
    return fit;
}

FreqDataset sample_response(const TransferFunction& model, std::span<const double> omega)
{
    FreqDataset d;
    d.omega.assign(omega.begin(), omega.end());
    for (double w : omega)
        d.response.push_back(freq_response(model, w));
    return d;
}

FreqDataset with_multiplicative_noise(const FreqDataset& data, double sigma, std::uint64_t seed)
{
    if (!(sigma >= 0.0))
        throw Error(Errc::invalid_argument, "noise level must be non-negative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    FreqDataset out = data;
    for (cd& h : out.response) {
        const double re = noise(rng);
        const double im = noise(rng);
        h *= cd(1.0 + re, im);
    }
    return out;
}

ThermalStepDataset simulate_thermal_step(const ThermalParams& params, double i_m, double duration,
                                         double sample_dt, double step)
{
    params.validate();
    if (!(duration > 0.0) || !(sample_dt > 0.0) || !(step > 0.0) || step > sample_dt)
        throw Error(Errc::invalid_argument, "thermal step simulation needs 0 < step <= sample_dt and duration > 0");
    const long per_sample = std::lround(sample_dt / step);
    const double h = sample_dt / static_cast<double>(per_sample);
    const long samples = std::lround(duration / sample_dt);
    ThermalStepDataset d;
    d.i_m = i_m;
    ThermalState s = ThermalState::ambient(params);
    for (long k = 0; k <= samples; ++k) {
        d.t.push_back(static_cast<double>(k) * sample_dt);
        d.T_W.push_back(s.T_W);
        d.T_H.push_back(s.T_H);
        d.T_M.push_back(s.T_M);
        for (long j = 0; j < per_sample && k < samples; ++j)
            s = thermal_step(s, i_m * i_m, h, params);
    }
    return d;
}

std::vector<double> log_space(double lo, double hi, std::size_t n)
{
    if (!(lo > 0.0 && hi > lo) || n < 2)
        throw Error(Errc::invalid_argument, "log_space needs 0 < lo < hi and n >= 2");
    std::vector<double> out(n);
    const double step = std::log(hi / lo) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k)
        out[k] = lo * std::exp(step * static_cast<double>(k));
    out.back() = hi;
    return out;
}

} // namespace sea
