#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "ato/data_model.hpp"
#include "ato/nuisance_estimates.hpp"

namespace ato::robust {

struct GammaConfig {
    double gamma = 0.5;  // 0 recovers the likelihood score
    double sigma = 1.0;  // scale of the Gaussian working density

    void validate() const;
};

// exp(-gamma r^2 / (2 sigma^2)): the working-density power, scaled so the
// weight at r = 0 is exactly 1.
double robust_weight(double r, const GammaConfig& cfg);

// e (1 - e); throws std::domain_error outside (0, 1).
double overlap_weight(double e);

enum class TreatmentForm {
    Residualized,  // regressor d - m_hat, outcome y - g_hat
    RawD,          // regressor d, outcome y - g0_hat
};

struct ScoreOptions {
    TreatmentForm form = TreatmentForm::Residualized;
    bool overlap_weighting = true;  // false: every unit gets the constant weight 0.25
    bool bias_correction = true;
};

// The scalar estimating equation written per unit: residual r_i(theta) =
// outcome_i - theta * regressor_i, weighted by overlap_i.
struct EstimatingData {
    Eigen::VectorXd outcome;
    Eigen::VectorXd regressor;
    Eigen::VectorXd overlap;

    [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(outcome.size()); }
    [[nodiscard]] Eigen::VectorXd residuals(double theta) const { return outcome - theta * regressor; }
};

EstimatingData make_estimating_data(const data::Dataset& data, const NuisanceEstimates& nuis,
                                    const ScoreOptions& options = {});

struct ScoreComponents {
    Eigen::VectorXd residuals;
    Eigen::VectorXd robust_weights;
    Eigen::VectorXd overlap_weights;
    Eigen::VectorXd treatment_residuals;
    double bias_term = 0.0;
};

struct ScoreValue {
    ScoreComponents components;
    double mean = 0.0;
};

// Empirical density power divergence for the Gaussian working model with the
// f-only term dropped. With overlap_weighted the sample mean becomes an
// overlap-weighted mean.
double dpd_objective(const EstimatingData& ed, double theta, const GammaConfig& cfg, bool overlap_weighted = false);
double dpd_objective(const data::Dataset& data, double theta, const NuisanceEstimates& nuis, const GammaConfig& cfg,
                     const ScoreOptions& options = {});

// Gauss-Hermite rule for the weight exp(-x^2).
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;

    static const GaussHermite& rule40();
    static GaussHermite build(std::size_t order);
    // E[f(R)] for R ~ N(mean, sd^2).
    template <class F>
    double normal_expectation(double mean, double sd, F&& f) const;
};

// E[w_gamma(R) R] for R ~ N(offset, sigma^2); offset 0 is the working model.
double working_moment(const GammaConfig& cfg, double offset = 0.0);

// Overlap-weighted average over units of E_f*[w_gamma(R) R] * regressor_i.
// Identically zero for the centred working model; a non-zero offset shifts
// the working mean and exercises the quadrature.
double bias_correction(const EstimatingData& ed, const GammaConfig& cfg, double working_offset = 0.0);

ScoreValue score(const EstimatingData& ed, double theta, const GammaConfig& cfg, double bias);
ScoreValue score(const data::Dataset& data, double theta, const NuisanceEstimates& nuis, const GammaConfig& cfg,
                 const ScoreOptions& options = {});

// psi_i = overlap_i [w(r_i) r_i regressor_i - bias] and its analytic theta derivative.
Eigen::VectorXd unit_scores(const EstimatingData& ed, double theta, const GammaConfig& cfg, double bias);
Eigen::VectorXd unit_score_derivatives(const EstimatingData& ed, double theta, const GammaConfig& cfg);

// 1.4826 * MAD, falling back to the standard deviation when the MAD is zero.
double estimate_scale(std::span<const double> residuals);
inline double estimate_scale(const Eigen::VectorXd& residuals) {
    return estimate_scale(std::span<const double>(residuals.data(), static_cast<std::size_t>(residuals.size())));
}

template <class F>
double GaussHermite::normal_expectation(double mean, double sd, F&& f) const {
    constexpr double kInvSqrtPi = 0.56418958354775628695;
    constexpr double kSqrt2 = 1.41421356237309504880;
    double total = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        total += weights[k] * f(mean + kSqrt2 * sd * nodes[k]);
    }
    return kInvSqrtPi * total;
}

}  // namespace ato::robust
