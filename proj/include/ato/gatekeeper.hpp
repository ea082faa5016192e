#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>

#include "ato/data_model.hpp"
#include "ato/gamma_lasso.hpp"

namespace ato::gate {

struct Moments {
    double skewness = 0.0;
    double kurtosis = 0.0;  // non-excess: 3 for a Gaussian
};

struct JarqueBera {
    double statistic = 0.0;
    double p_value = 1.0;
    Moments moments;
};

enum class Mode { FirstOrder, SecondOrder };

struct GatekeeperDecision {
    double skewness = 0.0;
    double kurtosis = 0.0;
    double jb_stat = 0.0;
    double p_value = 1.0;
    double alpha = 0.05;
    std::size_t n = 0;
    Mode mode = Mode::FirstOrder;
    lasso::CvRule cv_rule = lasso::CvRule::OneSE;
};

// Biased (divide-by-n) central moments. Throws NumericError on zero variance
// and DataError when n < 4.
Moments sample_moments(std::span<const double> v);
JarqueBera jarque_bera(std::span<const double> v);

// n/6 (S^2 + (K - 3)^2 / 4).
inline double jb_statistic(std::size_t n, double skewness, double kurtosis) {
    return static_cast<double>(n) / 6.0 * (skewness * skewness + 0.25 * (kurtosis - 3.0) * (kurtosis - 3.0));
}

// Chi-squared(2) survival function.
inline double jb_p_value(double jb) { return std::exp(-0.5 * jb); }

GatekeeperDecision decide_mode(std::span<const double> residuals, double alpha);
inline GatekeeperDecision decide_mode(const Eigen::VectorXd& residuals, double alpha) {
    return decide_mode(std::span<const double>(residuals.data(), static_cast<std::size_t>(residuals.size())), alpha);
}

const char* mode_name(Mode mode);

// Partially linear model used to probe the first-order partialled-out score
// psi = (Y - l(X) - theta (D - m(X))) (D - m(X)) at the truth:
//   X ~ N(0, 1), D = m0_slope X + v, Y = theta0 D + g0_slope X + zeta,
// with v and zeta drawn from the residual distribution. The nuisances are
// perturbed along l + t a(X), m + t b(X), with a and b linear in X.
struct ScoreSpec {
    double theta0 = -1.0;
    double m0_slope = 0.5;
    double g0_slope = 1.0;
    double l_direction_const = 0.0;
    double l_direction_slope = 0.0;
    double m_direction_const = 0.0;
    double m_direction_slope = 1.0;
    double step = 1e-3;
};

struct OrthogonalityReport {
    int order = 1;
    double mc_estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    double half_step_estimate = 0.0;  // same sample, step / 2
};

OrthogonalityReport check_orthogonality(const ScoreSpec& spec, const data::NoiseDist& residual_dist, int order,
                                        std::size_t n_mc, std::uint64_t seed);

// Closed-form expectation of the order-th directional derivative under spec.
double orthogonality_reference(const ScoreSpec& spec, int order);

}  // namespace ato::gate
