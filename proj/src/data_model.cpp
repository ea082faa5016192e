#include "ato/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ato/errors.hpp"

namespace ato::data {

namespace {

double logistic(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

// Partial Fisher-Yates: the first k entries become a uniform sample without
// replacement. Returned sorted so row order never depends on draw order.
std::vector<std::size_t> sample_rows(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

double sample_sd(const Eigen::VectorXd& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

void NoiseDist::validate() const {
    switch (kind) {
        case NoiseKind::Gaussian:
            if (!(sigma > 0.0) || !std::isfinite(sigma)) {
                throw ConfigError("Gaussian noise requires sigma > 0");
            }
            break;
        case NoiseKind::StudentT:
            if (!(df > 2.0) || !std::isfinite(df)) {
                throw ConfigError("StudentT noise requires df > 2");
            }
            if (!(sigma > 0.0)) {
                throw ConfigError("StudentT noise requires a positive scale");
            }
            break;
        case NoiseKind::SkewedMixture:
            if (!(sigma > 0.0) || !(mix_sigma > 0.0)) {
                throw ConfigError("mixture noise requires positive component scales");
            }
            if (!(mix_weight >= 0.0 && mix_weight < 1.0) || !std::isfinite(mix_shift)) {
                throw ConfigError("mixture noise requires weight in [0, 1) and a finite shift");
            }
            break;
    }
}

double NoiseDist::standard_deviation() const {
    switch (kind) {
        case NoiseKind::Gaussian:
            return sigma;
        case NoiseKind::StudentT:
            return sigma * std::sqrt(df / (df - 2.0));
        case NoiseKind::SkewedMixture: {
            const double w = mix_weight;
            const double second = (1.0 - w) * sigma * sigma + w * (mix_sigma * mix_sigma + mix_shift * mix_shift);
            const double mean = w * mix_shift;
            return std::sqrt(second - mean * mean);
        }
    }
    return sigma;
}

double NoiseDist::draw(Rng& rng) const {
    switch (kind) {
        case NoiseKind::Gaussian: {
            std::normal_distribution<double> z(0.0, sigma);
            return z(rng);
        }
        case NoiseKind::StudentT: {
            std::student_t_distribution<double> t(df);
            return sigma * t(rng);
        }
        case NoiseKind::SkewedMixture: {
            std::bernoulli_distribution shifted(mix_weight);
            if (shifted(rng)) {
                std::normal_distribution<double> z(mix_shift, mix_sigma);
                return z(rng) - mix_weight * mix_shift;
            }
            std::normal_distribution<double> z(0.0, sigma);
            return z(rng) - mix_weight * mix_shift;
        }
    }
    return 0.0;
}

void DgpConfig::validate() const {
    if (n == 0) {
        throw ConfigError("dgp: n must be positive");
    }
    if (p == 0) {
        throw ConfigError("dgp: p must be positive");
    }
    if (s > p) {
        throw ConfigError("dgp: s must not exceed p");
    }
    if (!std::isfinite(theta_true) || !std::isfinite(coef_magnitude) || !std::isfinite(propensity_strength) ||
        !std::isfinite(outcome_misspecification)) {
        throw ConfigError("dgp: coefficients must be finite");
    }
    noise.validate();
    if (treatment == TreatmentKind::Continuous) {
        treatment_noise.validate();
    }
}

double DgpConfig::signal_coefficient(std::size_t j) const {
    if (j >= s) {
        return 0.0;
    }
    return (j % 2 == 0) ? coef_magnitude : -coef_magnitude;
}

double DgpConfig::outcome_function(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double g = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
        g += signal_coefficient(j) * x(static_cast<Eigen::Index>(j));
    }
    if (outcome_misspecification != 0.0) {
        g += outcome_misspecification * (x(0) * x(0) - 1.0);
    }
    return g;
}

double DgpConfig::treatment_index(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double t = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
        t += signal_coefficient(j) * x(static_cast<Eigen::Index>(j));
    }
    return propensity_strength * t;
}

double DgpConfig::treatment_mean(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    const double index = treatment_index(x);
    return treatment == TreatmentKind::Binary ? logistic(index) : index;
}

bool Dataset::binary_treatment() const {
    return std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

void Dataset::validate() const {
    if (y.size() == 0) {
        throw DataError("dataset: n must be at least 1");
    }
    if (d.size() != y.size() || x.rows() != y.size()) {
        throw DataError("dataset: y, d and x disagree on the number of rows");
    }
    if (x.cols() == 0) {
        throw DataError("dataset: at least one covariate column is required");
    }
    if (!y.allFinite() || !d.allFinite() || !x.allFinite()) {
        throw DataError("dataset: non-finite entries");
    }
    if (outlier_mask && outlier_mask->size() != n()) {
        throw DataError("dataset: outlier mask length differs from n");
    }
}

Dataset generate_dataset(const DgpConfig& config) {
    config.validate();
    const auto n = static_cast<Eigen::Index>(config.n);
    const auto p = static_cast<Eigen::Index>(config.p);

    Rng covariate_rng = make_rng(config.seed, "dgp.covariates");
    Rng outcome_rng = make_rng(config.seed, "dgp.outcome_noise");
    Rng treatment_rng = make_rng(config.seed, "dgp.treatment");

    Dataset data;
    data.x.resize(n, p);
    data.y.resize(n);
    data.d.resize(n);

    std::normal_distribution<double> standard(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            data.x(i, j) = standard(covariate_rng);
        }
    }

    SyntheticTruth truth;
    truth.config = config;
    truth.outcome_noise.resize(n);
    truth.treatment_mean.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = data.x.row(i);
        const double mean_d = config.treatment_mean(row);
        truth.treatment_mean(i) = mean_d;
        if (config.treatment == TreatmentKind::Binary) {
            std::bernoulli_distribution assign(mean_d);
            data.d(i) = assign(treatment_rng) ? 1.0 : 0.0;
        } else {
            data.d(i) = mean_d + config.treatment_noise.draw(treatment_rng);
        }
        const double zeta = config.noise.draw(outcome_rng);
        truth.outcome_noise(i) = zeta;
        data.y(i) = config.theta_true * data.d(i) + config.outcome_function(row) + zeta;
    }
    data.outlier_mask = std::vector<bool>(config.n, false);
    data.truth = std::move(truth);
    return data;
}

void ContaminationSpec::validate() const {
    if (!(rate >= 0.0 && rate <= 0.9)) {
        throw ConfigError("contamination: rate must lie in [0, 0.9]");
    }
    if (!std::isfinite(magnitude) || !std::isfinite(region_threshold)) {
        throw ConfigError("contamination: magnitude and threshold must be finite");
    }
    if (mechanism == ContaminationKind::PropensityExtreme && !(extreme_propensity > 0.95 && extreme_propensity < 1.0)) {
        throw ConfigError("contamination: extreme propensity must lie in (0.95, 1)");
    }
}

Dataset contaminate(const Dataset& data, const ContaminationSpec& spec) {
    data.validate();
    spec.validate();

    Dataset out = data;
    const std::size_t n = data.n();
    out.outlier_mask = std::vector<bool>(n, false);
    const auto count = static_cast<std::size_t>(std::llround(spec.rate * static_cast<double>(n)));
    if (count == 0) {
        return out;
    }

    std::vector<std::size_t> eligible;
    eligible.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        bool ok = true;
        if (spec.mechanism == ContaminationKind::CovariateDependent) {
            if (spec.region_column >= data.p()) {
                throw ConfigError("contamination: region column out of range");
            }
            ok = data.x(row, static_cast<Eigen::Index>(spec.region_column)) > spec.region_threshold;
        }
        if (spec.treated_only && spec.mechanism != ContaminationKind::PropensityExtreme) {
            ok = ok && data.d(row) == 1.0;
        }
        if (ok) {
            eligible.push_back(i);
        }
    }
    if (spec.treated_only && !data.binary_treatment()) {
        throw ConfigError("contamination: treated_only requires a binary treatment");
    }
    if (eligible.size() < count) {
        throw DataError("contamination needs " + std::to_string(count) + " eligible rows, found " +
                        std::to_string(eligible.size()));
    }

    Rng rng = make_rng(spec.seed, "contamination");
    const std::vector<std::size_t> rows = sample_rows(std::move(eligible), count, rng);

    double unit = data.truth ? data.truth->config.noise.standard_deviation() : sample_sd(data.y);
    if (!(unit > 0.0)) {
        unit = 1.0;
    }

    if (spec.mechanism == ContaminationKind::PropensityExtreme) {
        if (!data.truth || data.truth->config.treatment != TreatmentKind::Binary) {
            throw DataError("contamination: propensity-extreme units need a synthetic binary-treatment dataset");
        }
        const DgpConfig& cfg = data.truth->config;
        Eigen::RowVectorXd direction = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(data.p()));
        for (std::size_t j = 0; j < cfg.s; ++j) {
            direction(static_cast<Eigen::Index>(j)) = cfg.propensity_strength * cfg.signal_coefficient(j);
        }
        const double norm2 = direction.squaredNorm();
        if (!(norm2 > 0.0)) {
            throw DataError("contamination: the propensity model has no covariate signal to push");
        }
        const double extreme_index = logit(spec.extreme_propensity);
        for (std::size_t i : rows) {
            const auto r = static_cast<Eigen::Index>(i);
            const double index = cfg.treatment_index(data.x.row(r));
            const double target = index >= 0.0 ? extreme_index : -extreme_index;
            out.x.row(r) += (target - index) / norm2 * direction;
            const double e = cfg.treatment_mean(out.x.row(r));
            std::bernoulli_distribution assign(e);
            out.d(r) = assign(rng) ? 1.0 : 0.0;
            out.y(r) = cfg.theta_true * out.d(r) + cfg.outcome_function(out.x.row(r)) + data.truth->outcome_noise(r);
            out.truth->treatment_mean(r) = e;
        }
    } else {
        const double shift = spec.magnitude * unit;
        for (std::size_t i : rows) {
            out.y(static_cast<Eigen::Index>(i)) += shift;
        }
    }
    for (std::size_t i : rows) {
        (*out.outlier_mask)[i] = true;
    }
    return out;
}

}  // namespace ato::data
