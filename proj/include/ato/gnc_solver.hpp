#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "ato/robust_core.hpp"

namespace ato::gnc {

// Geometric annealing of the scale inflation mu: mu0, mu0*alpha, ... down to
// the first level at or below mu_min, followed by a closing stage at mu = 0.
struct GncSchedule {
    double mu0 = 64.0;
    double alpha = 0.5;
    double mu_min = 1.0 / 16.0;
    std::size_t max_inner = 200;
    double inner_tol = 1e-9;

    // mu0 = 64 sigma^2, mu_min = sigma^2 / 16.
    static GncSchedule for_scale(double sigma);

    void validate() const;
    [[nodiscard]] std::vector<double> levels() const;
};

inline constexpr std::size_t kMaxLevels = 200;

struct TraceEntry {
    double mu = 0.0;
    double theta = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
};

struct SolveResult {
    double theta_hat = 0.0;
    bool converged = true;
    std::vector<TraceEntry> trace;
    Eigen::VectorXd final_weights;  // overlap * robust weight at theta_hat
};

// exp(-gamma r^2 / (2 (sigma^2 + mu))).
double surrogate_weight(double r, double mu, const robust::GammaConfig& cfg);

// One weighted least-squares update of the bias-corrected estimating equation
// with composite weights overlap_i * surrogate_weight(r_i(theta), mu).
double irls_step(const robust::EstimatingData& ed, double theta, double mu, const robust::GammaConfig& cfg,
                 double bias = 0.0);

// Overlap-weighted least squares: the mu -> infinity solution.
double init_convex(const robust::EstimatingData& ed, double bias = 0.0);

// IRLS at a single fixed mu from a given start.
TraceEntry solve_local(const robust::EstimatingData& ed, double theta_init, double mu, const robust::GammaConfig& cfg,
                       std::size_t max_inner, double inner_tol, double bias = 0.0);

SolveResult solve_gnc(const robust::EstimatingData& ed, const GncSchedule& schedule, const robust::GammaConfig& cfg,
                      double bias = 0.0);

SolveResult solve_gnc(const data::Dataset& data, const NuisanceEstimates& nuis, const GncSchedule& schedule,
                      const robust::GammaConfig& cfg, const robust::ScoreOptions& options = {});

Eigen::VectorXd composite_weights(const robust::EstimatingData& ed, double theta, double mu,
                                  const robust::GammaConfig& cfg);

}  // namespace ato::gnc
