#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ato/seeding.hpp"

namespace ato::data {

enum class NoiseKind { Gaussian, StudentT, SkewedMixture };

// Mean-zero noise law. For SkewedMixture a draw is N(0, sigma^2) with
// probability 1 - mix_weight and N(mix_shift, mix_sigma^2) otherwise, then
// recentred by mix_weight * mix_shift.
struct NoiseDist {
    NoiseKind kind = NoiseKind::Gaussian;
    double sigma = 1.0;  // Gaussian sd; scale multiplier for StudentT; base sd for the mixture
    double df = 5.0;
    double mix_weight = 0.1;
    double mix_shift = 4.0;
    double mix_sigma = 1.0;

    static NoiseDist gaussian(double sigma) { return {NoiseKind::Gaussian, sigma}; }
    static NoiseDist student_t(double df, double scale = 1.0) {
        NoiseDist d;
        d.kind = NoiseKind::StudentT;
        d.df = df;
        d.sigma = scale;
        return d;
    }

    void validate() const;
    [[nodiscard]] double standard_deviation() const;
    double draw(Rng& rng) const;
};

enum class TreatmentKind { Binary, Continuous };

// Partially linear data generator. Confounding enters through the first s
// covariates with coefficients +c, -c, +c, ... in both the outcome function
// and the treatment index.
struct DgpConfig {
    double theta_true = 1.0;
    std::size_t n = 1000;
    std::size_t p = 10;
    std::size_t s = 3;
    double coef_magnitude = 1.0;
    NoiseDist noise;
    double propensity_strength = 0.5;
    TreatmentKind treatment = TreatmentKind::Binary;
    NoiseDist treatment_noise;  // continuous treatment only: D = m0(X) + noise
    // Adds misspecification * (x1^2 - 1) to g0; a linear outcome model cannot
    // represent it.
    double outcome_misspecification = 0.0;
    std::uint64_t seed = 1;

    void validate() const;
    [[nodiscard]] double signal_coefficient(std::size_t j) const;
    [[nodiscard]] double outcome_function(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    [[nodiscard]] double treatment_index(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    // E[D | X]: the propensity for binary treatment, the linear index otherwise.
    [[nodiscard]] double treatment_mean(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

// Ground truth kept alongside synthetic data. Never written to CSV.
struct SyntheticTruth {
    DgpConfig config;
    Eigen::VectorXd outcome_noise;   // zeta
    Eigen::VectorXd treatment_mean;  // m0(X) = E[D | X]
};

struct Dataset {
    Eigen::VectorXd y;
    Eigen::VectorXd d;
    Eigen::MatrixXd x;
    std::optional<std::vector<bool>> outlier_mask;
    std::optional<SyntheticTruth> truth;

    [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(y.size()); }
    [[nodiscard]] std::size_t p() const { return static_cast<std::size_t>(x.cols()); }
    [[nodiscard]] bool binary_treatment() const;
    // Throws DataError when an invariant is broken.
    void validate() const;
};

enum class ContaminationKind { OutcomeShift, CovariateDependent, PropensityExtreme };

struct ContaminationSpec {
    double rate = 0.0;
    ContaminationKind mechanism = ContaminationKind::OutcomeShift;
    double magnitude = 10.0;  // outcome shift in units of the noise sd
    std::size_t region_column = 0;
    double region_threshold = 1.0;  // CovariateDependent: eligible rows have x[col] > threshold
    double extreme_propensity = 0.99;
    bool treated_only = false;  // restrict outcome shifts to treated units
    std::uint64_t seed = 1;

    void validate() const;
};

Dataset generate_dataset(const DgpConfig& config);

// Modifies exactly round(rate * n) rows, sampled without replacement, and marks
// them in outlier_mask. The input is left untouched.
Dataset contaminate(const Dataset& data, const ContaminationSpec& spec);

Dataset load_csv(const std::string& path);
Dataset parse_csv(const std::string& text);
void write_csv(const Dataset& data, const std::string& path);
std::string format_csv(const Dataset& data);

}  // namespace ato::data
