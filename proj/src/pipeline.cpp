#include "ato/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ato/errors.hpp"
#include "ato/seeding.hpp"

namespace ato::pipeline {

namespace {

constexpr double kDegenerateJacobian = 1e-12;
constexpr std::size_t kScaleRounds = 20;
constexpr double kScaleTol = 1e-6;
constexpr double kRefitTol = 1e-6;

Eigen::VectorXd robust_weights(const Eigen::VectorXd& r, const robust::GammaConfig& cfg) {
    Eigen::VectorXd w(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        w(i) = robust::robust_weight(r(i), cfg);
    }
    return w;
}

double median(const Eigen::VectorXd& v) {
    std::vector<double> s(v.begin(), v.end());
    const std::size_t mid = s.size() / 2;
    std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid), s.end());
    double m = s[mid];
    if (s.size() % 2 == 0) {
        m = 0.5 * (m + *std::max_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
}

Eigen::VectorXd clip_propensity(const Eigen::VectorXd& p) {
    return p.cwiseMax(lasso::kPropensityClip).cwiseMin(1.0 - lasso::kPropensityClip);
}

struct Solved {
    robust::EstimatingData ed;
    robust::GammaConfig gamma;
    double bias = 0.0;
    gnc::SolveResult solve;
};

gnc::SolveResult solve_at_scale(const robust::EstimatingData& ed, const robust::GammaConfig& gamma, double bias,
                                double theta_init, double start_sigma, const PipelineConfig& config) {
    gnc::SolveResult out;
    switch (config.estimator_variant) {
        case Variant::StandardDML: {
            const double theta = gnc::init_convex(ed);
            out.theta_hat = theta;
            out.trace.push_back({0.0, theta, 1, true});
            out.final_weights = ed.overlap;
            break;
        }
        case Variant::NaiveRobust: {
            const gnc::TraceEntry entry =
                gnc::solve_local(ed, theta_init, 0.0, gamma, config.gnc.max_inner, config.gnc.inner_tol, bias);
            out.theta_hat = entry.theta;
            out.converged = entry.converged;
            out.trace.push_back(entry);
            out.final_weights = gnc::composite_weights(ed, entry.theta, 0.0, gamma);
            break;
        }
        case Variant::Unified:
            out = gnc::solve_gnc(ed, config.schedule_for(gamma.sigma, start_sigma), gamma, bias);
            break;
    }
    return out;
}

// The scale starts from the residuals at the convex solution, which a gross
// outlier can inflate arbitrarily; it is then re-estimated at the robust
// solution until it settles. The annealing always starts from the convex-start
// scale so the first level stays near the convex limit.
Solved solve_once(const data::Dataset& data, const NuisanceEstimates& nuis, const PipelineConfig& config) {
    Solved s;
    const robust::ScoreOptions options = config.score_options();
    s.ed = robust::make_estimating_data(data, nuis, options);
    const double theta_init = gnc::init_convex(s.ed);
    s.gamma.gamma = config.effective_gamma();
    const double start_sigma = robust::estimate_scale(s.ed.residuals(theta_init));
    s.gamma.sigma = start_sigma;
    const std::size_t rounds = s.gamma.gamma > 0.0 ? kScaleRounds : 1;
    for (std::size_t round = 0; round < rounds; ++round) {
        s.bias = options.bias_correction ? robust::bias_correction(s.ed, s.gamma) : 0.0;
        s.solve = solve_at_scale(s.ed, s.gamma, s.bias, theta_init, start_sigma, config);
        if (round + 1 == rounds) {
            break;
        }
        const double sigma = robust::estimate_scale(s.ed.residuals(s.solve.theta_hat));
        const bool settled = std::abs(sigma - s.gamma.sigma) <= kScaleTol * s.gamma.sigma;
        if (settled) {
            break;
        }
        s.gamma.sigma = sigma;
    }
    return s;
}

}  // namespace

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::StandardDML:
            return "standard_dml";
        case Variant::NaiveRobust:
            return "naive_robust";
        case Variant::Unified:
            return "unified";
    }
    return "unified";
}

Variant parse_variant(const std::string& name) {
    if (name == "standard_dml") {
        return Variant::StandardDML;
    }
    if (name == "naive_robust") {
        return Variant::NaiveRobust;
    }
    if (name == "unified") {
        return Variant::Unified;
    }
    throw ConfigError("unknown estimator variant: " + name);
}

const char* treatment_form_name(robust::TreatmentForm f) {
    return f == robust::TreatmentForm::Residualized ? "residualized" : "raw_d";
}

robust::TreatmentForm parse_treatment_form(const std::string& name) {
    if (name == "residualized") {
        return robust::TreatmentForm::Residualized;
    }
    if (name == "raw_d") {
        return robust::TreatmentForm::RawD;
    }
    throw ConfigError("unknown treatment form: " + name);
}

void PipelineConfig::validate() const {
    if (k_folds < 2) {
        throw ConfigError("k_folds must be at least 2");
    }
    robust::GammaConfig{gamma, 1.0}.validate();
    gnc.validate();
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("alpha must lie in [0, 1]");
    }
    penalty.validate();
    if (propensity_override && !(*propensity_override > 0.0 && *propensity_override < 1.0)) {
        throw ConfigError("propensity_override must lie in (0, 1)");
    }
}

gnc::GncSchedule PipelineConfig::schedule_for(double sigma, double start_sigma) const {
    gnc::GncSchedule s = gnc;
    const double s2 = sigma * sigma;
    s.mu0 = gnc.mu0 * std::max(s2, start_sigma * start_sigma);
    s.mu_min = gnc.mu_min * s2;
    return s;
}

bool PipelineConfig::needs_joint_outcome_fit() const {
    return estimator_variant == Variant::NaiveRobust ||
           (estimator_variant == Variant::Unified && treatment_form == robust::TreatmentForm::RawD);
}

robust::ScoreOptions PipelineConfig::score_options() const {
    robust::ScoreOptions o;
    switch (estimator_variant) {
        case Variant::StandardDML:
            o.form = robust::TreatmentForm::Residualized;
            o.overlap_weighting = false;
            o.bias_correction = false;
            break;
        case Variant::NaiveRobust:
            o.form = robust::TreatmentForm::RawD;
            o.overlap_weighting = false;
            o.bias_correction = false;
            break;
        case Variant::Unified:
            o.form = treatment_form;
            o.overlap_weighting = true;
            o.bias_correction = true;
            break;
    }
    return o;
}

double PipelineConfig::effective_gamma() const { return estimator_variant == Variant::StandardDML ? 0.0 : gamma; }

namespace {

struct TreatmentStage {
    std::vector<int> fold_id;
    bool binary = false;
    lasso::OutOfFoldFit fit;
};

TreatmentStage fit_treatment(const data::Dataset& data, const PipelineConfig& config) {
    data.validate();
    config.validate();
    const std::size_t n = data.n();
    const std::size_t k = config.k_folds;
    if (n < 2 * k) {
        throw DataError("cross-fitting needs n >= 2 * k_folds (n = " + std::to_string(n) +
                        ", k_folds = " + std::to_string(k) + ")");
    }
    if (data.d.minCoeff() == data.d.maxCoeff()) {
        throw DataError("degenerate treatment");
    }
    TreatmentStage ts;
    ts.binary = data.binary_treatment();
    const Eigen::VectorXd strata = data.d;
    ts.fold_id = lasso::assign_folds(n, k, derive_seed(config.seed, "crossfit.folds"), ts.binary ? &strata : nullptr);
    ts.fit = lasso::out_of_fold(data.x, data.d, ts.binary ? lasso::Family::Logistic : lasso::Family::SquaredError,
                                config.penalty, ts.fold_id, k, derive_seed(config.seed, "crossfit.treatment"));
    return ts;
}

CrossFitResult fit_outcome(const data::Dataset& data, const PipelineConfig& config, const TreatmentStage& ts,
                           const Eigen::VectorXd* outcome_weights, const gate::GatekeeperDecision* fixed) {
    const std::size_t n = data.n();
    const std::size_t k = config.k_folds;
    if (outcome_weights != nullptr && static_cast<std::size_t>(outcome_weights->size()) != n) {
        throw DataError("cross-fitting: outcome weights have the wrong length");
    }
    const bool binary = ts.binary;
    const lasso::OutOfFoldFit& treatment = ts.fit;

    CrossFitResult out;
    NuisanceEstimates& nuis = out.nuisances;
    nuis.fold_id = ts.fold_id;

    lasso::FitOptions outcome_options;
    if (outcome_weights != nullptr) {
        outcome_options.observation_weights = *outcome_weights;
    }

    const lasso::OutOfFoldFit outcome =
        lasso::out_of_fold(data.x, data.y, lasso::Family::SquaredError, config.penalty, nuis.fold_id, k,
                           derive_seed(config.seed, "crossfit.outcome"), outcome_options);

    std::optional<lasso::OutOfFoldFit> joint;
    if (config.needs_joint_outcome_fit()) {
        const auto p = data.x.cols();
        Eigen::MatrixXd xd(data.x.rows(), p + 1);
        xd.col(0) = data.d;
        xd.rightCols(p) = data.x;
        Eigen::MatrixXd x_pred = xd;
        x_pred.col(0).setZero();
        lasso::FitOptions joint_options = outcome_options;
        joint_options.penalty_factors = Eigen::VectorXd::Ones(p + 1);
        joint_options.penalty_factors(0) = 0.0;
        joint = lasso::out_of_fold(xd, data.y, lasso::Family::SquaredError, config.penalty, nuis.fold_id, k,
                                   derive_seed(config.seed, "crossfit.joint_outcome"), joint_options, &x_pred);
    }

    if (fixed != nullptr) {
        out.decision = *fixed;
    } else {
        const Eigen::VectorXd preliminary = data.d - treatment.min_cv;
        out.decision = gate::decide_mode(preliminary, config.alpha);
    }
    const lasso::CvRule rule = out.decision.cv_rule;
    nuis.rule = rule;
    nuis.folds_converged = treatment.converged && outcome.converged && (!joint || joint->converged);

    nuis.m_hat = treatment.predictions(rule);
    nuis.g_hat = outcome.predictions(rule);
    if (binary) {
        nuis.m_hat = clip_propensity(nuis.m_hat);
        nuis.e_hat = nuis.m_hat;
    } else {
        nuis.e_hat = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 0.5);
    }
    if (config.propensity_override) {
        nuis.e_hat = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), *config.propensity_override);
    }
    if (joint) {
        nuis.g0_hat = joint->predictions(rule);
    }

    nuis.folds.clear();
    for (std::size_t f = 0; f < k; ++f) {
        FoldLog log;
        log.fold = static_cast<int>(f);
        log.n_train = 0;
        for (int id : nuis.fold_id) {
            log.n_train += id != static_cast<int>(f) ? 1 : 0;
        }
        log.outcome_index = outcome.indices(rule).at(f);
        log.treatment_index = treatment.indices(rule).at(f);
        log.net_outcome_index = joint ? joint->indices(rule).at(f) : 0;
        nuis.folds.push_back(log);
    }
    return out;
}


}  // namespace

CrossFitResult cross_fit_with_decision(const data::Dataset& data, const PipelineConfig& config,
                                       const Eigen::VectorXd* outcome_weights,
                                       const gate::GatekeeperDecision* fixed) {
    const TreatmentStage ts = fit_treatment(data, config);
    return fit_outcome(data, config, ts, outcome_weights, fixed);
}

NuisanceEstimates cross_fit(const data::Dataset& data, const PipelineConfig& config) {
    return cross_fit_with_decision(data, config).nuisances;
}

double standard_error(const robust::EstimatingData& ed, double theta_hat, const robust::GammaConfig& cfg,
                      double bias) {
    const Eigen::VectorXd psi = robust::unit_scores(ed, theta_hat, cfg, bias);
    const Eigen::VectorXd dpsi = robust::unit_score_derivatives(ed, theta_hat, cfg);
    const double n = static_cast<double>(ed.n());
    const double v = psi.squaredNorm() / n;
    const double j = -dpsi.sum() / n;
    if (!(std::abs(j) > kDegenerateJacobian)) {
        throw NumericError("standard error: score Jacobian is numerically zero");
    }
    const double se = std::sqrt(v / (n * j * j));
    if (!std::isfinite(se)) {
        throw NumericError("standard error is not finite");
    }
    return se;
}

double standard_error(const data::Dataset& data, double theta_hat, const NuisanceEstimates& nuis,
                      const robust::GammaConfig& cfg, const robust::ScoreOptions& options) {
    const robust::EstimatingData ed = robust::make_estimating_data(data, nuis, options);
    const double bias = options.bias_correction ? robust::bias_correction(ed, cfg) : 0.0;
    return standard_error(ed, theta_hat, cfg, bias);
}

EstimateReport estimate_ato(const data::Dataset& data, const PipelineConfig& config) {
    config.validate();
    const TreatmentStage ts = fit_treatment(data, config);
    CrossFitResult cf = fit_outcome(data, config, ts, nullptr, nullptr);
    Solved solved = solve_once(data, cf.nuisances, config);

    EstimateReport report;
    const bool refit = config.estimator_variant == Variant::Unified && config.gamma > 0.0;
    if (refit && config.refit_rounds > 0) {
        // The unweighted fit above can be wrecked by a single gross outlier, so
        // the first weights come from the outcome's own robust spread.
        const robust::GammaConfig marginal{config.gamma, robust::estimate_scale(data.y)};
        Eigen::VectorXd weights = robust_weights(data.y.array() - median(data.y), marginal);
        for (std::size_t round = 0; round < config.refit_rounds; ++round) {
            cf = fit_outcome(data, config, ts, &weights, &cf.decision);
            solved = solve_once(data, cf.nuisances, config);
            ++report.refits;
            const Eigen::VectorXd next =
                robust_weights(solved.ed.residuals(solved.solve.theta_hat), solved.gamma);
            const double change = (next - weights).cwiseAbs().maxCoeff();
            weights = next;
            if (change <= kRefitTol) {
                break;
            }
        }
    }

    report.theta_hat = solved.solve.theta_hat;
    report.std_error = standard_error(solved.ed, report.theta_hat, solved.gamma, solved.bias);
    report.ci_lo = report.theta_hat - 1.96 * report.std_error;
    report.ci_hi = report.theta_hat + 1.96 * report.std_error;
    report.gatekeeper = cf.decision;
    report.solve = std::move(solved.solve);
    report.bias_term = solved.bias;
    report.sigma_hat = solved.gamma.sigma;
    const double sum = solved.ed.overlap.sum();
    report.effective_sample_size = sum * sum / solved.ed.overlap.squaredNorm();
    report.nuisances = std::move(cf.nuisances);
    report.config = config;
    return report;
}

}  // namespace ato::pipeline
