#include "ato/robust_core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ato/errors.hpp"

namespace ato::robust {

namespace {

double median_inplace(std::vector<double>& v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

double density_power_constant(const GammaConfig& cfg) {
    return std::pow(2.0 * std::numbers::pi * cfg.sigma * cfg.sigma, -0.5 * cfg.gamma);
}

}  // namespace

void GammaConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw ConfigError("gamma must be a finite value >= 0");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ConfigError("sigma must be a finite value > 0");
    }
}

double robust_weight(double r, const GammaConfig& cfg) {
    return std::exp(-cfg.gamma * r * r / (2.0 * cfg.sigma * cfg.sigma));
}

double overlap_weight(double e) {
    if (!(e > 0.0 && e < 1.0)) {
        throw std::domain_error("overlap_weight: propensity must lie in (0, 1), got " + std::to_string(e));
    }
    return e * (1.0 - e);
}

EstimatingData make_estimating_data(const data::Dataset& data, const NuisanceEstimates& nuis,
                                    const ScoreOptions& options) {
    const auto n = static_cast<Eigen::Index>(data.n());
    if (nuis.m_hat.size() != n || nuis.g_hat.size() != n || nuis.e_hat.size() != n) {
        throw DataError("nuisance estimates do not cover every unit");
    }
    EstimatingData ed;
    if (options.form == TreatmentForm::Residualized) {
        ed.outcome = data.y - nuis.g_hat;
        ed.regressor = data.d - nuis.m_hat;
    } else {
        if (nuis.g0_hat.size() != n) {
            throw DataError("raw-treatment form needs the joint outcome fit g0_hat");
        }
        ed.outcome = data.y - nuis.g0_hat;
        ed.regressor = data.d;
    }
    ed.overlap.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ed.overlap(i) = options.overlap_weighting ? overlap_weight(nuis.e_hat(i)) : 0.25;
    }
    return ed;
}

double dpd_objective(const EstimatingData& ed, double theta, const GammaConfig& cfg, bool overlap_weighted) {
    cfg.validate();
    if (cfg.gamma == 0.0) {
        throw ConfigError("dpd_objective is undefined at gamma = 0; use the squared-error loss");
    }
    if (ed.n() == 0) {
        throw DataError("dpd_objective: no units");
    }
    const double c = density_power_constant(cfg);
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < ed.outcome.size(); ++i) {
        const double r = ed.outcome(i) - theta * ed.regressor(i);
        const double weight = overlap_weighted ? ed.overlap(i) : 1.0;
        num += weight * robust_weight(r, cfg);
        den += weight;
    }
    if (!(den > 0.0)) {
        throw NumericError("dpd_objective: overlap weights sum to zero");
    }
    return -(c / cfg.gamma) * (num / den) + (1.0 / (1.0 + cfg.gamma)) * c / std::sqrt(1.0 + cfg.gamma);
}

double dpd_objective(const data::Dataset& data, double theta, const NuisanceEstimates& nuis, const GammaConfig& cfg,
                     const ScoreOptions& options) {
    return dpd_objective(make_estimating_data(data, nuis, options), theta, cfg, false);
}

GaussHermite GaussHermite::build(std::size_t order) {
    if (order == 0) {
        throw ConfigError("Gauss-Hermite order must be positive");
    }
    // Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix of the
    // Hermite recurrence.
    const auto m = static_cast<Eigen::Index>(order);
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index k = 1; k < m; ++k) {
        const double b = std::sqrt(static_cast<double>(k) / 2.0);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    if (solver.info() != Eigen::Success) {
        throw NumericError("Gauss-Hermite eigen-decomposition failed");
    }
    GaussHermite rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const double sqrt_pi = std::sqrt(std::numbers::pi);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double v0 = solver.eigenvectors()(0, k);
        rule.nodes[static_cast<std::size_t>(k)] = solver.eigenvalues()(k);
        rule.weights[static_cast<std::size_t>(k)] = sqrt_pi * v0 * v0;
    }
    return rule;
}

const GaussHermite& GaussHermite::rule40() {
    static const GaussHermite rule = build(40);
    return rule;
}

double working_moment(const GammaConfig& cfg, double offset) {
    cfg.validate();
    // The integrand is odd about zero when offset = 0; return the exact zero
    // rather than the quadrature's rounding noise.
    if (offset == 0.0) {
        return 0.0;
    }
    const double value = GaussHermite::rule40().normal_expectation(
        offset, cfg.sigma, [&](double r) { return robust_weight(r, cfg) * r; });
    if (!std::isfinite(value)) {
        throw NumericError("bias correction quadrature produced a non-finite value");
    }
    return value;
}

double bias_correction(const EstimatingData& ed, const GammaConfig& cfg, double working_offset) {
    const double moment = working_moment(cfg, working_offset);
    if (moment == 0.0) {
        return 0.0;
    }
    const double total_overlap = ed.overlap.sum();
    if (!(total_overlap > 0.0)) {
        throw NumericError("bias correction: overlap weights sum to zero");
    }
    const double b = moment * ed.overlap.dot(ed.regressor) / total_overlap;
    if (!std::isfinite(b)) {
        throw NumericError("bias correction produced a non-finite value");
    }
    return b;
}

ScoreValue score(const EstimatingData& ed, double theta, const GammaConfig& cfg, double bias) {
    cfg.validate();
    const Eigen::Index n = ed.outcome.size();
    ScoreValue out;
    ScoreComponents& c = out.components;
    c.residuals = ed.residuals(theta);
    c.robust_weights.resize(n);
    c.overlap_weights = ed.overlap;
    c.treatment_residuals = ed.regressor;
    c.bias_term = bias;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = robust_weight(c.residuals(i), cfg);
        c.robust_weights(i) = w;
        total += ed.overlap(i) * (w * c.residuals(i) * ed.regressor(i) - bias);
    }
    out.mean = n > 0 ? total / static_cast<double>(n) : 0.0;
    return out;
}

ScoreValue score(const data::Dataset& data, double theta, const NuisanceEstimates& nuis, const GammaConfig& cfg,
                 const ScoreOptions& options) {
    const EstimatingData ed = make_estimating_data(data, nuis, options);
    const double bias = options.bias_correction ? bias_correction(ed, cfg) : 0.0;
    return score(ed, theta, cfg, bias);
}

Eigen::VectorXd unit_scores(const EstimatingData& ed, double theta, const GammaConfig& cfg, double bias) {
    const Eigen::Index n = ed.outcome.size();
    Eigen::VectorXd psi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = ed.outcome(i) - theta * ed.regressor(i);
        psi(i) = ed.overlap(i) * (robust_weight(r, cfg) * r * ed.regressor(i) - bias);
    }
    return psi;
}

Eigen::VectorXd unit_score_derivatives(const EstimatingData& ed, double theta, const GammaConfig& cfg) {
    const Eigen::Index n = ed.outcome.size();
    const double inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
    Eigen::VectorXd dpsi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = ed.regressor(i);
        const double r = ed.outcome(i) - theta * u;
        dpsi(i) = -ed.overlap(i) * u * u * robust_weight(r, cfg) * (1.0 - cfg.gamma * r * r * inv_s2);
    }
    return dpsi;
}

double estimate_scale(std::span<const double> residuals) {
    if (residuals.size() < 2) {
        throw DataError("estimate_scale needs at least two residuals");
    }
    std::vector<double> work(residuals.begin(), residuals.end());
    for (double v : work) {
        if (!std::isfinite(v)) {
            throw NumericError("estimate_scale: non-finite residual");
        }
    }
    const double med = median_inplace(work);
    for (std::size_t i = 0; i < work.size(); ++i) {
        work[i] = std::abs(residuals[i] - med);
    }
    const double mad = median_inplace(work);
    if (mad > 0.0) {
        return 1.4826 * mad;
    }
    double mean = 0.0;
    for (double v : residuals) {
        mean += v;
    }
    mean /= static_cast<double>(residuals.size());
    double ss = 0.0;
    for (double v : residuals) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(residuals.size() - 1));
    if (!(sd > 0.0)) {
        throw NumericError("degenerate residuals");
    }
    return sd;
}

}  // namespace ato::robust
