#pragma once

#include <cmath>
#include <random>

#include "ato/robust_core.hpp"
#include "ato/seeding.hpp"

namespace ato::testing {

// One-dimensional estimating problem: inliers follow the true slope, a
// clustered fraction follows a consistent fake slope.
struct ToyOptions {
    Eigen::Index n = 200;
    double outlier_fraction = 0.4;
    double theta_true = 1.0;
    double fake_slope = -4.0;
    double inlier_sd = 1.0;
    double outlier_sd = 1.0;
};

inline robust::EstimatingData make_toy(const ToyOptions& opt, std::uint64_t seed) {
    Rng rng = make_rng(seed, "test.toy");
    std::normal_distribution<double> z(0.0, 1.0);
    const auto n_out = static_cast<Eigen::Index>(std::llround(opt.outlier_fraction * static_cast<double>(opt.n)));
    robust::EstimatingData ed;
    ed.outcome.resize(opt.n);
    ed.regressor.resize(opt.n);
    ed.overlap = Eigen::VectorXd::Constant(opt.n, 0.25);
    for (Eigen::Index i = 0; i < opt.n; ++i) {
        const double u = z(rng);
        ed.regressor(i) = u;
        ed.outcome(i) = i < n_out ? opt.fake_slope * u + opt.outlier_sd * z(rng)
                                  : opt.theta_true * u + opt.inlier_sd * z(rng);
    }
    return ed;
}

// Dense grid minimiser of the gamma-objective.
inline double grid_minimizer(const robust::EstimatingData& ed, const robust::GammaConfig& cfg, double lo = -10.0,
                             double hi = 10.0, double step = 1e-3) {
    double best_theta = lo;
    double best = std::numeric_limits<double>::infinity();
    const auto steps = static_cast<long>(std::llround((hi - lo) / step));
    for (long k = 0; k <= steps; ++k) {
        const double theta = lo + static_cast<double>(k) * step;
        const double value = robust::dpd_objective(ed, theta, cfg, true);
        if (value < best) {
            best = value;
            best_theta = theta;
        }
    }
    return best_theta;
}

}  // namespace ato::testing
