#include <cmath>
#include <set>
#include <string>

#include "ato/data_model.hpp"
#include "ato/errors.hpp"
#include "ato/seeding.hpp"
#include "doctest.h"

using namespace ato;
using namespace ato::data;

namespace {

DgpConfig small_config(std::uint64_t seed = 7) {
    DgpConfig c;
    c.n = 400;
    c.p = 6;
    c.s = 3;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_SUITE("data_model") {
    TEST_CASE("seed derivation is deterministic and keyed by component") {
        CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
        CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
        CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
        CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    }

    TEST_CASE("generated data follow the outcome equation exactly") {
        const DgpConfig c = small_config();
        const Dataset d = generate_dataset(c);
        REQUIRE(d.n() == c.n);
        REQUIRE(d.p() == c.p);
        REQUIRE(d.truth.has_value());
        CHECK(d.binary_treatment());
        for (Eigen::Index i = 0; i < d.y.size(); ++i) {
            double g = 0.0;
            for (std::size_t j = 0; j < c.s; ++j) {
                g += (j % 2 == 0 ? 1.0 : -1.0) * c.coef_magnitude * d.x(i, static_cast<Eigen::Index>(j));
            }
            CHECK(d.y(i) == doctest::Approx(c.theta_true * d.d(i) + g + d.truth->outcome_noise(i)).epsilon(1e-14));
        }
        REQUIRE(d.outlier_mask.has_value());
        for (bool b : *d.outlier_mask) {
            CHECK_FALSE(b);
        }
    }

    TEST_CASE("generation is reproducible and seed-sensitive") {
        const Dataset a = generate_dataset(small_config(3));
        const Dataset b = generate_dataset(small_config(3));
        const Dataset c = generate_dataset(small_config(4));
        CHECK(a.y == b.y);
        CHECK(a.x == b.x);
        CHECK(a.d == b.d);
        CHECK(a.y != c.y);
    }

    TEST_CASE("continuous treatment uses the linear index plus noise") {
        DgpConfig c = small_config();
        c.treatment = TreatmentKind::Continuous;
        c.n = 20000;
        const Dataset d = generate_dataset(c);
        CHECK_FALSE(d.binary_treatment());
        const Eigen::VectorXd v = d.d - d.truth->treatment_mean;
        CHECK(std::abs(v.mean()) < 0.05);
        CHECK(std::sqrt(v.squaredNorm() / static_cast<double>(v.size())) == doctest::Approx(1.0).epsilon(0.03));
    }

    TEST_CASE("noise distributions are centred with the stated spread") {
        Rng rng = make_rng(5, "test.noise");
        NoiseDist mixture;
        mixture.kind = NoiseKind::SkewedMixture;
        for (const NoiseDist& nd : {NoiseDist::gaussian(2.0), NoiseDist::student_t(5.0, 1.0), mixture}) {
            const int m = 200000;
            double sum = 0.0;
            double sum_sq = 0.0;
            for (int i = 0; i < m; ++i) {
                const double z = nd.draw(rng);
                sum += z;
                sum_sq += z * z;
            }
            const double mean = sum / m;
            const double sd = std::sqrt(sum_sq / m - mean * mean);
            CHECK(std::abs(mean) < 4.0 * nd.standard_deviation() / std::sqrt(static_cast<double>(m)));
            CHECK(sd == doctest::Approx(nd.standard_deviation()).epsilon(0.03));
        }
    }

    TEST_CASE("invalid configurations are rejected") {
        DgpConfig c = small_config();
        c.s = c.p + 1;
        CHECK_THROWS_AS(generate_dataset(c), ConfigError);
        c = small_config();
        c.noise = NoiseDist::student_t(2.0, 1.0);
        CHECK_THROWS_AS(generate_dataset(c), ConfigError);
        c = small_config();
        c.n = 0;
        CHECK_THROWS_AS(generate_dataset(c), ConfigError);
    }

    TEST_CASE("outcome shift contaminates exactly the rounded count and marks it") {
        const Dataset base = generate_dataset(small_config());
        ContaminationSpec spec;
        spec.rate = 0.1;
        spec.magnitude = 10.0;
        spec.seed = 9;
        const Dataset out = contaminate(base, spec);
        std::size_t flagged = 0;
        for (std::size_t i = 0; i < out.n(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const bool marked = (*out.outlier_mask)[i];
            flagged += marked ? 1 : 0;
            if (marked) {
                CHECK(out.y(r) == doctest::Approx(base.y(r) + 10.0).epsilon(1e-14));
            } else {
                CHECK(out.y(r) == base.y(r));
            }
            CHECK(out.d(r) == base.d(r));
        }
        CHECK(flagged == 40);
        const Dataset again = contaminate(base, spec);
        CHECK(again.y == out.y);
    }

    TEST_CASE("covariate-dependent contamination stays inside the region") {
        const Dataset base = generate_dataset(small_config());
        ContaminationSpec spec;
        spec.mechanism = ContaminationKind::CovariateDependent;
        spec.rate = 0.05;
        spec.region_column = 1;
        spec.region_threshold = 0.5;
        const Dataset out = contaminate(base, spec);
        for (std::size_t i = 0; i < out.n(); ++i) {
            if ((*out.outlier_mask)[i]) {
                CHECK(base.x(static_cast<Eigen::Index>(i), 1) > 0.5);
            }
        }
        spec.rate = 0.9;
        CHECK_THROWS_AS(contaminate(base, spec), DataError);
    }

    TEST_CASE("treated-only shifts touch treated units only") {
        const Dataset base = generate_dataset(small_config());
        ContaminationSpec spec;
        spec.rate = 0.1;
        spec.treated_only = true;
        const Dataset out = contaminate(base, spec);
        for (std::size_t i = 0; i < out.n(); ++i) {
            if ((*out.outlier_mask)[i]) {
                CHECK(base.d(static_cast<Eigen::Index>(i)) == 1.0);
            }
        }
    }

    TEST_CASE("propensity-extreme units land at the requested propensity") {
        const Dataset base = generate_dataset(small_config());
        ContaminationSpec spec;
        spec.mechanism = ContaminationKind::PropensityExtreme;
        spec.rate = 0.05;
        spec.extreme_propensity = 0.99;
        const Dataset out = contaminate(base, spec);
        const DgpConfig& c = base.truth->config;
        std::size_t flagged = 0;
        for (std::size_t i = 0; i < out.n(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            if (!(*out.outlier_mask)[i]) {
                CHECK(out.x.row(r) == base.x.row(r));
                continue;
            }
            ++flagged;
            const double e = c.treatment_mean(out.x.row(r));
            CHECK(std::min(e, 1.0 - e) == doctest::Approx(0.01).epsilon(1e-9));
            CHECK(out.y(r) == doctest::Approx(c.theta_true * out.d(r) + c.outcome_function(out.x.row(r)) +
                                              base.truth->outcome_noise(r)));
        }
        CHECK(flagged == 20);
    }

    TEST_CASE("csv round trip is exact") {
        const Dataset base = generate_dataset(small_config());
        const std::string text = format_csv(base);
        const Dataset back = parse_csv(text);
        CHECK(back.y == base.y);
        CHECK(back.d == base.d);
        CHECK(back.x == base.x);
        CHECK(format_csv(back) == text);
    }

    TEST_CASE("csv columns are matched by name") {
        const Dataset d = parse_csv("x2,d,y,x1\n1,0,5,2\n3,1,6,4\n");
        CHECK(d.y(0) == 5.0);
        CHECK(d.x(0, 0) == 2.0);
        CHECK(d.x(0, 1) == 1.0);
        CHECK(d.d(1) == 1.0);
        CHECK_FALSE(d.outlier_mask.has_value());
    }

    TEST_CASE("csv errors name the problem") {
        auto message = [](const std::string& text) {
            try {
                parse_csv(text);
            } catch (const DataError& e) {
                return std::string(e.what());
            }
            return std::string("no error");
        };
        CHECK(message("y,x1\n1,2\n") == "missing column: d");
        CHECK(message("y,d,x1\n1,0,abc\n") == "row 1, column x1: non-numeric value 'abc'");
        CHECK(message("y,d,x1\n1,0,2\n1,0\n") == "row 2: expected 3 fields, found 2");
        CHECK(message("y,d,x1,z\n1,0,2,3\n").find("unexpected column: z") != std::string::npos);
        CHECK(message("y,d,x1,outlier\n1,0,2,2\n").find("expected 0 or 1") != std::string::npos);
        CHECK(message("y,d,x1\n1,0,nan\n").find("non-finite") != std::string::npos);
        CHECK(message("").find("empty") != std::string::npos);
    }

    TEST_CASE("csv tolerates CRLF and blank lines") {
        const Dataset d = parse_csv("y,d,x1\r\n1,0,2\r\n\r\n3,1,4\r\n");
        CHECK(d.n() == 2);
        CHECK(d.x(1, 0) == 4.0);
    }
}
