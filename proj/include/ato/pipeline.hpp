#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "ato/data_model.hpp"
#include "ato/gamma_lasso.hpp"
#include "ato/gatekeeper.hpp"
#include "ato/gnc_solver.hpp"
#include "ato/nuisance_estimates.hpp"
#include "ato/robust_core.hpp"

namespace ato::pipeline {

enum class Variant {
    StandardDML,  // gamma = 0, constant weights, convex solve
    NaiveRobust,  // robust weights on the raw-treatment score, no correction, no overlap weighting, no annealing
    Unified,      // overlap and robust weights, bias correction, annealed solve, robust nuisance refits
};

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);
const char* treatment_form_name(robust::TreatmentForm f);
robust::TreatmentForm parse_treatment_form(const std::string& name);

struct PipelineConfig {
    std::size_t k_folds = 5;
    double gamma = 0.5;
    // mu0 and mu_min are in units of the estimated residual variance.
    gnc::GncSchedule gnc;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    Variant estimator_variant = Variant::Unified;
    robust::TreatmentForm treatment_form = robust::TreatmentForm::Residualized;
    lasso::PenaltyConfig penalty;
    // Unified only: re-cross-fit the outcome nuisances with the robust weights
    // of the previous solve, at most this many times; stops once the weights
    // settle.
    std::size_t refit_rounds = 10;
    std::optional<double> propensity_override;

    void validate() const;
    // mu0 scales with the larger of the two variances, mu_min with sigma^2.
    [[nodiscard]] gnc::GncSchedule schedule_for(double sigma, double start_sigma = 0.0) const;
    [[nodiscard]] bool needs_joint_outcome_fit() const;
    [[nodiscard]] robust::ScoreOptions score_options() const;
    [[nodiscard]] double effective_gamma() const;
};

struct CrossFitResult {
    NuisanceEstimates nuisances;
    gate::GatekeeperDecision decision;
};

// Folds, nuisance fits and the gatekeeper decision. The decision is taken on
// preliminary MinCV treatment residuals unless `fixed` is given; the returned
// nuisances use the rule it implies. `outcome_weights` reweights the outcome
// regressions only.
CrossFitResult cross_fit_with_decision(const data::Dataset& data, const PipelineConfig& config,
                                       const Eigen::VectorXd* outcome_weights = nullptr,
                                       const gate::GatekeeperDecision* fixed = nullptr);

NuisanceEstimates cross_fit(const data::Dataset& data, const PipelineConfig& config);

struct EstimateReport {
    double theta_hat = 0.0;
    double std_error = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    gate::GatekeeperDecision gatekeeper;
    gnc::SolveResult solve;
    double bias_term = 0.0;
    double sigma_hat = 0.0;
    double effective_sample_size = 0.0;
    std::size_t refits = 0;
    NuisanceEstimates nuisances;
    PipelineConfig config;
};

// Sandwich standard error of the root theta_hat of the per-unit scores.
double standard_error(const robust::EstimatingData& ed, double theta_hat, const robust::GammaConfig& cfg, double bias);
double standard_error(const data::Dataset& data, double theta_hat, const NuisanceEstimates& nuis,
                      const robust::GammaConfig& cfg, const robust::ScoreOptions& options = {});

EstimateReport estimate_ato(const data::Dataset& data, const PipelineConfig& config);

}  // namespace ato::pipeline
