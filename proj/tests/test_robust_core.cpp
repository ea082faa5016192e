#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "ato/errors.hpp"
#include "ato/robust_core.hpp"
#include "ato/seeding.hpp"
#include "doctest.h"

using namespace ato;
using namespace ato::robust;

namespace {

EstimatingData toy_data(Eigen::Index n, std::uint64_t seed, double theta = 1.0) {
    Rng rng = make_rng(seed, "test.robust");
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> e(0.1, 0.9);
    EstimatingData ed;
    ed.outcome.resize(n);
    ed.regressor.resize(n);
    ed.overlap.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ed.regressor(i) = z(rng);
        ed.outcome(i) = theta * ed.regressor(i) + z(rng);
        ed.overlap(i) = overlap_weight(e(rng));
    }
    return ed;
}

// E[exp(-a R^2) R] for R ~ N(delta, s^2) in closed form.
double gaussian_moment(double a, double delta, double s) {
    const double k = 1.0 + 2.0 * a * s * s;
    return delta / std::pow(k, 1.5) * std::exp(-a * delta * delta / k);
}

}  // namespace

TEST_SUITE("robust_core") {
    TEST_CASE("robust weight examples") {
        CHECK(robust_weight(3.7, {0.0, 1.0}) == 1.0);
        CHECK(robust_weight(0.0, {0.8, 2.0}) == 1.0);
        CHECK(robust_weight(2.0, {1.0, 1.0}) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
        CHECK(robust_weight(2.0, {1.0, 1.0}) == doctest::Approx(0.1353).epsilon(1e-3));
    }

    TEST_CASE("overlap weight examples and domain") {
        CHECK(overlap_weight(0.5) == 0.25);
        CHECK(overlap_weight(0.9) == doctest::Approx(0.09).epsilon(1e-14));
        CHECK(overlap_weight(1e-9) < 1e-8);
        CHECK(overlap_weight(1.0 - 1e-9) < 1e-8);
        CHECK_THROWS_AS(overlap_weight(0.0), std::domain_error);
        CHECK_THROWS_AS(overlap_weight(1.0), std::domain_error);
        CHECK_THROWS_AS(overlap_weight(-0.2), std::domain_error);
    }

    TEST_CASE("gamma config validation") {
        CHECK_THROWS_AS((GammaConfig{-0.1, 1.0}.validate()), ConfigError);
        CHECK_THROWS_AS((GammaConfig{0.5, 0.0}.validate()), ConfigError);
        CHECK_NOTHROW((GammaConfig{0.0, 1.0}.validate()));
    }

    TEST_CASE("dpd objective at zero residuals has the closed form") {
        const GammaConfig cfg{0.7, 1.3};
        EstimatingData ed;
        ed.regressor = Eigen::VectorXd::LinSpaced(25, -1.0, 1.0);
        ed.outcome = 2.0 * ed.regressor;
        ed.overlap = Eigen::VectorXd::Constant(25, 0.25);
        const double c = std::pow(2.0 * std::numbers::pi * 1.3 * 1.3, -0.35);
        const double expected = -c / 0.7 + c / (1.7 * std::sqrt(1.7));
        CHECK(dpd_objective(ed, 2.0, cfg) == doctest::Approx(expected).epsilon(1e-14));
        CHECK_THROWS_AS(dpd_objective(ed, 2.0, GammaConfig{0.0, 1.0}), ConfigError);
    }

    TEST_CASE("dpd objective has a bounded per-point loss and is monotone in each residual") {
        const GammaConfig cfg{0.5, 1.0};
        EstimatingData ed = toy_data(40, 1);
        const double base = dpd_objective(ed, 1.0, cfg);
        const double cap = std::pow(2.0 * std::numbers::pi, -0.25) / (40.0 * 0.5);
        for (double shift : {10.0, 1e3, 1e10}) {
            EstimatingData moved = ed;
            moved.outcome(3) += shift;
            CHECK(std::abs(dpd_objective(moved, 1.0, cfg) - base) <= cap * (1.0 + 1e-12));
        }
        EstimatingData closer = ed;
        const double r = closer.outcome(5) - closer.regressor(5);
        closer.outcome(5) -= 0.5 * r;
        CHECK(dpd_objective(closer, 1.0, cfg) < base);
    }

    TEST_CASE("gauss-hermite rule reproduces Gaussian moments") {
        const GaussHermite& rule = GaussHermite::rule40();
        REQUIRE(rule.nodes.size() == 40);
        double wsum = 0.0;
        for (double w : rule.weights) {
            wsum += w;
        }
        CHECK(wsum == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
        CHECK(rule.normal_expectation(0.3, 2.0, [](double r) { return r; }) == doctest::Approx(0.3).epsilon(1e-13));
        CHECK(rule.normal_expectation(0.0, 2.0, [](double r) { return r * r; }) ==
              doctest::Approx(4.0).epsilon(1e-13));
        CHECK(rule.normal_expectation(0.0, 2.0, [](double r) { return r * r * r * r; }) ==
              doctest::Approx(48.0).epsilon(1e-12));
    }

    TEST_CASE("bias correction vanishes for the centred working model") {
        const EstimatingData ed = toy_data(100, 2);
        for (double g : {0.0, 0.1, 0.5, 2.0}) {
            for (double s : {0.3, 1.0, 4.0}) {
                CHECK(bias_correction(ed, {g, s}) == 0.0);
            }
        }
        CHECK(bias_correction(ed, {0.0, 1.0}, 0.5) == doctest::Approx(0.5 * ed.overlap.dot(ed.regressor) /
                                                                        ed.overlap.sum()));
    }

    TEST_CASE("offset working model: quadrature matches closed form and Monte Carlo") {
        const GammaConfig cfg{0.5, 1.0};
        const double quad = working_moment(cfg, 0.5);
        const double exact = gaussian_moment(0.25, 0.5, 1.0);
        CHECK(quad == doctest::Approx(exact).epsilon(1e-12));
        CHECK(exact == doctest::Approx(0.26106).epsilon(1e-4));

        Rng rng = make_rng(3, "test.bias_mc");
        std::normal_distribution<double> r(0.5, 1.0);
        const int m = 1000000;
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int i = 0; i < m; ++i) {
            const double x = r(rng);
            const double v = robust_weight(x, cfg) * x;
            sum += v;
            sum_sq += v * v;
        }
        const double mean = sum / m;
        const double se = std::sqrt((sum_sq / m - mean * mean) / m);
        CHECK(std::abs(quad - mean) < 3.0 * se);

        EstimatingData ed;
        ed.regressor = Eigen::VectorXd::Ones(4);
        ed.outcome = Eigen::VectorXd::Zero(4);
        ed.overlap = Eigen::VectorXd::Constant(4, 0.2);
        CHECK(bias_correction(ed, cfg, 0.5) == doctest::Approx(exact).epsilon(1e-12));
        CHECK(bias_correction(ed, cfg, -0.5) == doctest::Approx(-exact).epsilon(1e-12));
    }

    TEST_CASE("gamma = 0 score root is the partialled-out least-squares slope") {
        EstimatingData ed = toy_data(300, 4, 1.7);
        ed.overlap.setConstant(0.25);
        const double slope = ed.regressor.dot(ed.outcome) / ed.regressor.squaredNorm();
        const ScoreValue at_root = score(ed, slope, {0.0, 1.0}, 0.0);
        CHECK(std::abs(at_root.mean) < 1e-14);
        const double expected = 0.25 * (ed.regressor.dot(ed.outcome) - 1.3 * ed.regressor.squaredNorm()) / 300.0;
        CHECK(score(ed, 1.3, {0.0, 1.0}, 0.0).mean == doctest::Approx(expected).epsilon(1e-12));
    }

    TEST_CASE("score components respect their ranges") {
        const EstimatingData ed = toy_data(200, 5);
        const ScoreValue s = score(ed, 0.8, {0.5, 1.0}, 0.0);
        CHECK(s.components.robust_weights.maxCoeff() <= 1.0);
        CHECK(s.components.robust_weights.minCoeff() > 0.0);
        CHECK(s.components.overlap_weights.maxCoeff() <= 0.25);
        CHECK(s.components.overlap_weights.minCoeff() >= 0.0);
        CHECK(s.components.residuals.isApprox(ed.outcome - 0.8 * ed.regressor));
    }

    TEST_CASE("one corrupted unit moves the mean score by a bounded amount") {
        const GammaConfig cfg{0.5, 1.0};
        const EstimatingData ed = toy_data(500, 6);
        EstimatingData bad = ed;
        bad.outcome(0) += 1e10;
        const double diff = std::abs(score(bad, 1.0, cfg, 0.0).mean - score(ed, 1.0, cfg, 0.0).mean);
        const double cap = ed.overlap(0) * std::abs(ed.regressor(0)) * cfg.sigma / std::sqrt(cfg.gamma * std::exp(1.0));
        CHECK(diff <= cap / 500.0 * (1.0 + 1e-12));
    }

    TEST_CASE("per-unit influence redescends with the stated maximum") {
        for (const GammaConfig cfg : {GammaConfig{0.5, 1.0}, GammaConfig{2.0, 0.7}, GammaConfig{0.1, 3.0}}) {
            double best = 0.0;
            for (double r = 0.0; r < 40.0 * cfg.sigma; r += 1e-4 * cfg.sigma) {
                best = std::max(best, robust_weight(r, cfg) * r);
            }
            CHECK(best == doctest::Approx(cfg.sigma / std::sqrt(cfg.gamma * std::exp(1.0))).epsilon(1e-7));
            CHECK(robust_weight(1e3 * cfg.sigma, cfg) * 1e3 * cfg.sigma < 1e-10);
        }
    }

    TEST_CASE("double down-weighting drives the composite weight to zero") {
        const GammaConfig cfg{0.5, 1.0};
        CHECK(overlap_weight(1e-8) * robust_weight(0.0, cfg) < 1e-7);
        CHECK(overlap_weight(0.5) * robust_weight(50.0, cfg) < 1e-100);
    }

    TEST_CASE("mean score approaches the unweighted moment as gamma shrinks") {
        const EstimatingData ed = toy_data(300, 7);
        const double target = score(ed, 0.6, {0.0, 1.0}, 0.0).mean;
        double previous = std::numeric_limits<double>::infinity();
        for (double g : {1e-2, 1e-4, 1e-6}) {
            const double gap = std::abs(score(ed, 0.6, {g, 1.0}, 0.0).mean - target);
            CHECK(gap < previous);
            previous = gap;
        }
        CHECK(previous < 1e-5);
    }

    TEST_CASE("analytic score derivative matches finite differences") {
        const GammaConfig cfg{0.5, 1.2};
        const EstimatingData ed = toy_data(50, 8);
        Rng rng = make_rng(9, "test.derivative");
        std::uniform_real_distribution<double> u(-2.0, 3.0);
        for (int k = 0; k < 5; ++k) {
            const double theta = u(rng);
            const double h = 1e-5;
            const Eigen::VectorXd fd =
                (unit_scores(ed, theta + h, cfg, 0.0) - unit_scores(ed, theta - h, cfg, 0.0)) / (2.0 * h);
            const Eigen::VectorXd an = unit_score_derivatives(ed, theta, cfg);
            CHECK((fd - an).norm() / an.norm() < 1e-6);
        }
    }

    TEST_CASE("centring under the working model") {
        const GammaConfig cfg{0.5, 1.0};
        const EstimatingData ed = toy_data(200000, 10, 1.0);
        const Eigen::VectorXd psi = unit_scores(ed, 1.0, cfg, bias_correction(ed, cfg));
        const double mean = psi.mean();
        const double se = std::sqrt((psi.array() - mean).square().sum() / (psi.size() - 1.0) / psi.size());
        CHECK(std::abs(mean) < 3.0 * se);
    }

    TEST_CASE("scale estimate examples") {
        CHECK(estimate_scale(std::vector<double>{-1.0, 0.0, 1.0}) == doctest::Approx(1.4826).epsilon(1e-15));
        Rng rng = make_rng(11, "test.scale");
        std::normal_distribution<double> z(0.0, 1.0);
        Eigen::VectorXd v(100000);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            v(i) = z(rng);
        }
        const double s = estimate_scale(v);
        CHECK(std::abs(s - 1.0) < 0.02);
        const Eigen::VectorXd shifted = v.array() + 17.0;
        CHECK(estimate_scale(shifted) == doctest::Approx(s).epsilon(1e-12));
    }

    TEST_CASE("scale estimate fallbacks") {
        const std::vector<double> spike{0.0, 0.0, 0.0, 0.0, 5.0};
        CHECK(estimate_scale(spike) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));
        CHECK_THROWS_WITH_AS(estimate_scale(std::vector<double>{2.0, 2.0, 2.0}), "degenerate residuals", NumericError);
        CHECK_THROWS_AS(estimate_scale(std::vector<double>{1.0}), DataError);
    }
}
