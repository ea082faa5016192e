#include "ato/gnc_solver.hpp"

#include <cmath>
#include <string>

#include "ato/errors.hpp"

namespace ato::gnc {

namespace {

constexpr double kDegenerateDesign = 1e-12;

}  // namespace

GncSchedule GncSchedule::for_scale(double sigma) {
    GncSchedule s;
    const double s2 = sigma * sigma;
    s.mu0 = 64.0 * s2;
    s.mu_min = s2 / 16.0;
    return s;
}

void GncSchedule::validate() const {
    if (!(mu0 > 0.0) || !std::isfinite(mu0)) {
        throw ConfigError("gnc: mu0 must be positive and finite");
    }
    if (!(mu_min >= 0.0) || !(mu0 > mu_min)) {
        throw ConfigError("gnc: require mu0 > mu_min >= 0");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("gnc: alpha must lie in (0, 1)");
    }
    if (max_inner == 0) {
        throw ConfigError("gnc: max_inner must be positive");
    }
    if (!(inner_tol > 0.0)) {
        throw ConfigError("gnc: inner_tol must be positive");
    }
}

std::vector<double> GncSchedule::levels() const {
    validate();
    std::vector<double> out;
    // Multiplying repeatedly keeps exact powers of two exact for alpha = 0.5;
    // the relative slack absorbs rounding for other factors.
    double mu = mu0;
    while (out.size() < kMaxLevels) {
        out.push_back(mu);
        if (mu <= mu_min * (1.0 + 1e-12)) {
            break;
        }
        mu *= alpha;
    }
    out.push_back(0.0);
    return out;
}

double surrogate_weight(double r, double mu, const robust::GammaConfig& cfg) {
    return std::exp(-cfg.gamma * r * r / (2.0 * (cfg.sigma * cfg.sigma + mu)));
}

Eigen::VectorXd composite_weights(const robust::EstimatingData& ed, double theta, double mu,
                                  const robust::GammaConfig& cfg) {
    const Eigen::Index n = ed.outcome.size();
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        w(i) = ed.overlap(i) * surrogate_weight(ed.outcome(i) - theta * ed.regressor(i), mu, cfg);
    }
    return w;
}

double irls_step(const robust::EstimatingData& ed, double theta, double mu, const robust::GammaConfig& cfg,
                 double bias) {
    if (!(mu >= 0.0)) {
        throw ConfigError("irls_step: mu must be >= 0");
    }
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < ed.outcome.size(); ++i) {
        const double u = ed.regressor(i);
        const double w = ed.overlap(i) * surrogate_weight(ed.outcome(i) - theta * u, mu, cfg);
        num += w * u * ed.outcome(i);
        den += w * u * u;
    }
    if (bias != 0.0) {
        num -= bias * ed.overlap.sum();
    }
    if (!(den >= kDegenerateDesign)) {
        throw NumericError("degenerate design: weighted treatment variation " + std::to_string(den) +
                           " is below 1e-12");
    }
    return num / den;
}

double init_convex(const robust::EstimatingData& ed, double bias) {
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < ed.outcome.size(); ++i) {
        const double u = ed.regressor(i);
        num += ed.overlap(i) * u * ed.outcome(i);
        den += ed.overlap(i) * u * u;
    }
    if (bias != 0.0) {
        num -= bias * ed.overlap.sum();
    }
    if (!(den >= kDegenerateDesign)) {
        throw NumericError("degenerate design: weighted treatment variation " + std::to_string(den) +
                           " is below 1e-12");
    }
    return num / den;
}

TraceEntry solve_local(const robust::EstimatingData& ed, double theta_init, double mu, const robust::GammaConfig& cfg,
                       std::size_t max_inner, double inner_tol, double bias) {
    TraceEntry entry;
    entry.mu = mu;
    entry.converged = false;
    double theta = theta_init;
    for (std::size_t it = 1; it <= max_inner; ++it) {
        const double next = irls_step(ed, theta, mu, cfg, bias);
        entry.iterations = it;
        const double step = std::abs(next - theta);
        theta = next;
        if (step <= inner_tol) {
            entry.converged = true;
            break;
        }
    }
    entry.theta = theta;
    return entry;
}

SolveResult solve_gnc(const robust::EstimatingData& ed, const GncSchedule& schedule, const robust::GammaConfig& cfg,
                      double bias) {
    cfg.validate();
    const std::vector<double> mus = schedule.levels();
    SolveResult result;
    double theta = init_convex(ed, bias);
    for (double mu : mus) {
        TraceEntry entry = solve_local(ed, theta, mu, cfg, schedule.max_inner, schedule.inner_tol, bias);
        result.converged = result.converged && entry.converged;
        theta = entry.theta;
        result.trace.push_back(entry);
    }
    result.theta_hat = theta;
    result.final_weights = composite_weights(ed, theta, 0.0, cfg);
    return result;
}

SolveResult solve_gnc(const data::Dataset& data, const NuisanceEstimates& nuis, const GncSchedule& schedule,
                      const robust::GammaConfig& cfg, const robust::ScoreOptions& options) {
    const robust::EstimatingData ed = robust::make_estimating_data(data, nuis, options);
    const double bias = options.bias_correction ? robust::bias_correction(ed, cfg) : 0.0;
    return solve_gnc(ed, schedule, cfg, bias);
}

}  // namespace ato::gnc
