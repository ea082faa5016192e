#include <cmath>
#include <random>
#include <vector>

#include "ato/errors.hpp"
#include "ato/gatekeeper.hpp"
#include "ato/seeding.hpp"
#include "doctest.h"

using namespace ato;
using namespace ato::gate;

namespace {

std::vector<double> draws(const data::NoiseDist& nd, std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed, "test.gate.draws");
    std::vector<double> v(n);
    for (double& x : v) {
        x = nd.draw(rng);
    }
    return v;
}

double mode_b_rate(std::size_t n, int reps) {
    int hits = 0;
    for (int r = 0; r < reps; ++r) {
        const auto v = draws(data::NoiseDist::student_t(3.0, 1.0), n, 500 + static_cast<std::uint64_t>(r));
        hits += decide_mode(v, 0.05).mode == Mode::SecondOrder ? 1 : 0;
    }
    return static_cast<double>(hits) / reps;
}

}  // namespace

TEST_SUITE("gatekeeper") {
    TEST_CASE("moment examples") {
        CHECK(sample_moments(std::vector<double>{-2, -1, 1, 2}).skewness == 0.0);
        std::vector<double> two_point;
        for (int i = 0; i < 10; ++i) {
            two_point.push_back(i % 2 ? 1.0 : -1.0);
        }
        CHECK(sample_moments(two_point).kurtosis == doctest::Approx(1.0).epsilon(1e-15));
        const Moments k = sample_moments(std::vector<double>{-2, -1, 1, 2});
        CHECK(k.kurtosis == doctest::Approx((16.0 + 1 + 1 + 16) / 4.0 / (2.5 * 2.5)).epsilon(1e-15));
    }

    TEST_CASE("moments are affine invariant") {
        const auto v = draws(data::NoiseDist::student_t(5.0, 1.0), 300, 1);
        std::vector<double> w;
        for (double x : v) {
            w.push_back(3.5 * x - 11.0);
        }
        const Moments a = sample_moments(v);
        const Moments b = sample_moments(w);
        CHECK(b.skewness == doctest::Approx(a.skewness).epsilon(1e-10));
        CHECK(b.kurtosis == doctest::Approx(a.kurtosis).epsilon(1e-10));
    }

    TEST_CASE("degenerate inputs are rejected") {
        CHECK_THROWS_AS(sample_moments(std::vector<double>{1, 1, 1, 1, 1}), NumericError);
        CHECK_THROWS_AS(sample_moments(std::vector<double>{1, 2, 3}), DataError);
        CHECK_THROWS_AS(decide_mode(std::vector<double>{1, 2, 3, 4}, 1.5), ConfigError);
    }

    TEST_CASE("statistic examples") {
        CHECK(jb_statistic(600, 0.5, 4.0) == doctest::Approx(50.0).epsilon(1e-15));
        CHECK(jb_p_value(50.0) == doctest::Approx(std::exp(-25.0)).epsilon(1e-15));
        CHECK(jb_statistic(123, 0.0, 3.0) == 0.0);
        CHECK(jb_p_value(0.0) == 1.0);
        double prev = 1.0;
        for (double x = 0.5; x < 40.0; x += 0.5) {
            CHECK(jb_p_value(x) < prev);
            prev = jb_p_value(x);
        }
    }

    TEST_CASE("jarque-bera agrees with the moment formula") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto v = draws(data::NoiseDist::student_t(4.0, 1.0), 250, seed);
            double mean = 0.0;
            for (double x : v) {
                mean += x;
            }
            mean /= v.size();
            double m2 = 0.0, m3 = 0.0, m4 = 0.0;
            for (double x : v) {
                m2 += std::pow(x - mean, 2);
                m3 += std::pow(x - mean, 3);
                m4 += std::pow(x - mean, 4);
            }
            m2 /= v.size();
            m3 /= v.size();
            m4 /= v.size();
            const double s = m3 / std::pow(m2, 1.5);
            const double k = m4 / (m2 * m2);
            const double expected = v.size() / 6.0 * (s * s + (k - 3.0) * (k - 3.0) / 4.0);
            const JarqueBera jb = jarque_bera(v);
            CHECK(std::abs(jb.statistic - expected) <= 1e-12 * std::max(1.0, expected));
            CHECK(jb.p_value == std::exp(-jb.statistic / 2.0));
        }
    }

    TEST_CASE("mode follows the p-value threshold") {
        std::vector<double> v;
        for (int i = 0; i < 12; ++i) {
            v.push_back(std::vector<double>{-2, -1, 1, 2}[static_cast<std::size_t>(i % 4)] * 0.7);
        }
        const GatekeeperDecision d = decide_mode(v, 0.05);
        CHECK(d.skewness == doctest::Approx(0.0).epsilon(1e-15));
        CHECK((d.mode == Mode::FirstOrder) == (d.p_value > 0.05));
        CHECK((d.cv_rule == lasso::CvRule::OneSE) == (d.mode == Mode::FirstOrder));
        CHECK(decide_mode(v, d.p_value).mode == Mode::SecondOrder);
        CHECK(decide_mode(v, std::nextafter(d.p_value, 0.0)).mode == Mode::FirstOrder);
    }

    TEST_CASE("alpha = 0 always selects the first-order mode") {
        const auto v = draws(data::NoiseDist::student_t(2.5, 1.0), 20000, 3);
        const GatekeeperDecision d = decide_mode(v, 0.0);
        CHECK(d.mode == Mode::FirstOrder);
        CHECK(d.cv_rule == lasso::CvRule::OneSE);
        CHECK(decide_mode(v, 1.0).mode == Mode::SecondOrder);
    }

    TEST_CASE("decision is deterministic") {
        const auto v = draws(data::NoiseDist::gaussian(1.0), 400, 4);
        const GatekeeperDecision a = decide_mode(v, 0.05);
        const GatekeeperDecision b = decide_mode(v, 0.05);
        CHECK(a.jb_stat == b.jb_stat);
        CHECK(a.mode == b.mode);
    }

    TEST_CASE("size under Gaussian residuals is close to nominal") {
        int rejections = 0;
        const int reps = 1000;
        for (int r = 0; r < reps; ++r) {
            const auto v = draws(data::NoiseDist::gaussian(1.0), 500, 10000 + static_cast<std::uint64_t>(r));
            rejections += decide_mode(v, 0.05).mode == Mode::SecondOrder ? 1 : 0;
        }
        const double rate = static_cast<double>(rejections) / reps;
        CHECK(rate > 0.025);
        CHECK(rate < 0.075);
    }

    TEST_CASE("heavy tails select the second-order mode consistently") {
        const double a = mode_b_rate(200, 200);
        const double b = mode_b_rate(500, 200);
        const double c = mode_b_rate(2000, 200);
        CHECK(a <= b);
        CHECK(b <= c);
        CHECK(c >= 0.99);
    }

    TEST_CASE("first-order score is Neyman orthogonal") {
        const OrthogonalityReport r = check_orthogonality({}, data::NoiseDist::gaussian(1.0), 1, 200000, 1);
        CHECK(r.std_error > 0.0);
        CHECK(std::abs(r.mc_estimate) < 3.0 * r.std_error);
        CHECK(orthogonality_reference({}, 1) == 0.0);
    }

    TEST_CASE("second directional derivative matches the analytic value") {
        ScoreSpec spec;
        CHECK(orthogonality_reference(spec, 2) == doctest::Approx(2.0));
        const OrthogonalityReport r = check_orthogonality(spec, data::NoiseDist::gaussian(1.0), 2, 200000, 2);
        CHECK(std::abs(r.mc_estimate - 2.0) < 3.0 * r.std_error + 1e-6);
        CHECK(std::abs(r.mc_estimate) > 5.0 * r.std_error);
        CHECK(r.half_step_estimate == doctest::Approx(r.mc_estimate).epsilon(1e-4));

        spec.l_direction_slope = 0.7;
        spec.m_direction_const = 0.4;
        spec.theta0 = 0.5;
        const double expected = 2.0 * (0.7 * 1.0 - 0.5 * (0.16 + 1.0));
        CHECK(orthogonality_reference(spec, 2) == doctest::Approx(expected));
        const OrthogonalityReport s = check_orthogonality(spec, data::NoiseDist::gaussian(1.0), 2, 200000, 3);
        CHECK(std::abs(s.mc_estimate - expected) < 3.0 * s.std_error + 1e-6);
    }

    TEST_CASE("stein identity sanity check") {
        Rng rng = make_rng(5, "test.stein");
        std::normal_distribution<double> z(0.0, 1.0);
        const int m = 200000;
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < m; ++i) {
            const double x = z(rng);
            const double v = x * x * x;
            sum += v;
            sum_sq += v * v;
        }
        const double mean = sum / m;
        const double se = std::sqrt((sum_sq / m - mean * mean) / m);
        CHECK(std::abs(mean) < 3.0 * se);
    }

    TEST_CASE("orthogonality checker validates its arguments") {
        CHECK_THROWS_AS(check_orthogonality({}, data::NoiseDist::gaussian(1.0), 3, 10, 1), ConfigError);
        CHECK_THROWS_AS(check_orthogonality({}, data::NoiseDist::gaussian(1.0), 1, 0, 1), ConfigError);
    }
}
