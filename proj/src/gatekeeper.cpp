#include "ato/gatekeeper.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "ato/errors.hpp"
#include "ato/seeding.hpp"

namespace ato::gate {

Moments sample_moments(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 4) {
        throw DataError("sample moments need at least 4 values, got " + std::to_string(n));
    }
    double mean = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError("sample moments: non-finite value");
        }
        mean += x;
    }
    mean /= static_cast<double>(n);
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double x : v) {
        const double c = x - mean;
        const double c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    if (!(m2 > 0.0)) {
        throw NumericError("sample moments: zero variance");
    }
    return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2)};
}

JarqueBera jarque_bera(std::span<const double> v) {
    JarqueBera out;
    out.moments = sample_moments(v);
    const double s = out.moments.skewness;
    const double k = out.moments.kurtosis;
    out.statistic = jb_statistic(v.size(), s, k);
    out.p_value = jb_p_value(out.statistic);
    return out;
}

GatekeeperDecision decide_mode(std::span<const double> residuals, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("gatekeeper: alpha must lie in [0, 1]");
    }
    const JarqueBera jb = jarque_bera(residuals);
    GatekeeperDecision d;
    d.skewness = jb.moments.skewness;
    d.kurtosis = jb.moments.kurtosis;
    d.jb_stat = jb.statistic;
    d.p_value = jb.p_value;
    d.alpha = alpha;
    d.n = residuals.size();
    // Compared on the log scale so an underflowed p still satisfies p > 0 = alpha.
    const double log_alpha = alpha > 0.0 ? std::log(alpha) : -std::numeric_limits<double>::infinity();
    const bool first_order = -0.5 * jb.statistic > log_alpha;
    d.mode = first_order ? Mode::FirstOrder : Mode::SecondOrder;
    d.cv_rule = first_order ? lasso::CvRule::OneSE : lasso::CvRule::MinCV;
    return d;
}

const char* mode_name(Mode mode) { return mode == Mode::FirstOrder ? "FirstOrder" : "SecondOrder"; }

double orthogonality_reference(const ScoreSpec& spec, int order) {
    if (order == 1) {
        return 0.0;
    }
    if (order != 2) {
        throw ConfigError("orthogonality order must be 1 or 2");
    }
    // d2/dt2 of (zeta - t a + theta t b)(v - t b) is 2 b (a - theta b); X ~ N(0, 1).
    const double ac = spec.l_direction_const;
    const double as = spec.l_direction_slope;
    const double bc = spec.m_direction_const;
    const double bs = spec.m_direction_slope;
    const double e_ab = ac * bc + as * bs;
    const double e_bb = bc * bc + bs * bs;
    return 2.0 * (e_ab - spec.theta0 * e_bb);
}

OrthogonalityReport check_orthogonality(const ScoreSpec& spec, const data::NoiseDist& residual_dist, int order,
                                        std::size_t n_mc, std::uint64_t seed) {
    if (order != 1 && order != 2) {
        throw ConfigError("orthogonality order must be 1 or 2");
    }
    if (n_mc == 0) {
        throw ConfigError("orthogonality check needs n_mc > 0");
    }
    if (!(spec.step > 0.0)) {
        throw ConfigError("orthogonality check needs a positive finite-difference step");
    }
    residual_dist.validate();

    Rng rng = make_rng(seed, "gatekeeper.orthogonality");
    std::normal_distribution<double> standard(0.0, 1.0);

    auto difference = [order](auto&& psi, double h) {
        if (order == 1) {
            return (psi(h) - psi(-h)) / (2.0 * h);
        }
        return (psi(h) - 2.0 * psi(0.0) + psi(-h)) / (h * h);
    };

    double sum = 0.0;
    double sum_sq = 0.0;
    double sum_half = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        const double x = standard(rng);
        const double v = residual_dist.draw(rng);
        const double zeta = residual_dist.draw(rng);
        const double m0 = spec.m0_slope * x;
        const double d = m0 + v;
        const double g0 = spec.g0_slope * x;
        const double y = spec.theta0 * d + g0 + zeta;
        const double l0 = spec.theta0 * m0 + g0;
        const double a = spec.l_direction_const + spec.l_direction_slope * x;
        const double b = spec.m_direction_const + spec.m_direction_slope * x;
        auto psi = [&](double t) {
            const double l = l0 + t * a;
            const double m = m0 + t * b;
            return (y - l - spec.theta0 * (d - m)) * (d - m);
        };
        const double value = difference(psi, spec.step);
        const double half = difference(psi, 0.5 * spec.step);
        if (!std::isfinite(value) || !std::isfinite(half)) {
            throw NumericError("orthogonality check: non-finite derivative sample");
        }
        sum += value;
        sum_sq += value * value;
        sum_half += half;
    }
    OrthogonalityReport report;
    report.order = order;
    report.n_samples = n_mc;
    const double n = static_cast<double>(n_mc);
    report.mc_estimate = sum / n;
    report.half_step_estimate = sum_half / n;
    if (n_mc > 1) {
        const double var = std::max(0.0, (sum_sq - n * report.mc_estimate * report.mc_estimate) / (n - 1.0));
        report.std_error = std::sqrt(var / n);
    }
    return report;
}

}  // namespace ato::gate
