#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ato::lasso {

enum class Family { SquaredError, Logistic };

// Path of one-step estimators: at path point t every slope is penalised with
// weight 1 / (1 + gamma_pen * |beta_j(t-1)|) measured on the standardised
// scale. gamma_pen = 0 gives the plain lasso path.
struct PenaltyConfig {
    double gamma_pen = 10.0;
    std::size_t n_lambda = 50;
    double lambda_min_ratio = 0.01;
    std::size_t max_iter = 10000;
    double tol = 1e-7;

    void validate() const;
};

enum class CvRule { MinCV, OneSE };

struct CvErrors {
    Eigen::VectorXd mean;       // per lambda, average of the fold mean losses
    Eigen::VectorXd se;         // per lambda, sd of fold losses / sqrt(k)
    Eigen::MatrixXd fold_loss;  // k x n_lambda
};

struct RegressionPath {
    Family family = Family::SquaredError;
    Eigen::VectorXd lambdas;       // strictly decreasing
    Eigen::MatrixXd coefficients;  // n_lambda x (p + 1); column 0 is the intercept, original scale
    std::vector<std::size_t> iterations;  // coordinate sweeps spent at each path point
    bool converged = true;
    std::optional<CvErrors> cv;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(lambdas.size()); }
    [[nodiscard]] Eigen::VectorXd slopes(std::size_t index) const;
    // Linear predictor for SquaredError, probability for Logistic.
    [[nodiscard]] Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& x, std::size_t index) const;
};

struct FitOptions {
    Eigen::VectorXd observation_weights;  // empty: all ones
    Eigen::VectorXd penalty_factors;      // empty: all ones; 0 leaves a slope unpenalised
    Eigen::VectorXd lambdas;              // empty: geometric grid from lambda_max
};

RegressionPath fit_path(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target,
                        Family family, const PenaltyConfig& config, const FitOptions& options = {});

// Deterministic balanced fold labels 0..k-1. With a binary `strata`, labels
// are dealt separately inside each class.
std::vector<int> assign_folds(std::size_t n, std::size_t k_folds, std::uint64_t seed,
                              const Eigen::VectorXd* strata = nullptr);

RegressionPath cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target,
                              Family family, const PenaltyConfig& config, std::size_t k_folds, std::uint64_t seed,
                              const FitOptions& options = {});

RegressionPath cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target,
                              Family family, const PenaltyConfig& config, std::span<const int> fold_id,
                              const FitOptions& options = {});

std::size_t select_lambda(const RegressionPath& path, CvRule rule);
std::size_t select_lambda(const CvErrors& cv, CvRule rule);

// Out-of-fold predictions under both selection rules. Each outer fold runs
// its own inner cross-validation on the complement.
struct OutOfFoldFit {
    Eigen::VectorXd min_cv;
    Eigen::VectorXd one_se;
    std::vector<std::size_t> min_cv_index;  // per outer fold
    std::vector<std::size_t> one_se_index;
    bool converged = true;

    [[nodiscard]] const Eigen::VectorXd& predictions(CvRule rule) const {
        return rule == CvRule::MinCV ? min_cv : one_se;
    }
    [[nodiscard]] const std::vector<std::size_t>& indices(CvRule rule) const {
        return rule == CvRule::MinCV ? min_cv_index : one_se_index;
    }
};

// `prediction_x` replaces x when scoring held-out rows (same shape); used to
// evaluate a joint fit with selected columns zeroed.
OutOfFoldFit out_of_fold(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target,
                         Family family, const PenaltyConfig& config, std::span<const int> fold_id,
                         std::size_t inner_folds, std::uint64_t seed, const FitOptions& options = {},
                         const Eigen::MatrixXd* prediction_x = nullptr);

inline constexpr double kPropensityClip = 1e-6;

struct PropensityFit {
    Eigen::VectorXd e_hat;
    std::vector<int> fold_id;
};

PropensityFit fit_propensity(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& d,
                             const PenaltyConfig& config, std::size_t k_folds, std::uint64_t seed,
                             CvRule rule = CvRule::MinCV);

}  // namespace ato::lasso
