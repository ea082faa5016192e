#include "ato/gamma_lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "ato/errors.hpp"
#include "ato/seeding.hpp"

namespace ato::lasso {

namespace {

constexpr double kConstantColumnSd = 1e-10;
constexpr double kMinVariance = 1e-5;  // floor on p(1-p) in the logistic working weights
constexpr std::size_t kMaxOuter = 100;

double soft_threshold(double z, double t) {
    if (z > t) {
        return z - t;
    }
    if (z < -t) {
        return z + t;
    }
    return 0.0;
}

double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// Standardised design shared by both families. Only non-constant columns are
// kept; `columns` maps back to the caller's column index.
struct Standardized {
    Eigen::MatrixXd z;
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    std::vector<Eigen::Index> columns;
};

Standardized standardize(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::VectorXd& v) {
    Standardized s;
    const Eigen::Index p = x.cols();
    s.mean = Eigen::VectorXd::Zero(p);
    s.sd = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double m = v.dot(x.col(j));
        const double var = v.dot((x.col(j).array() - m).square().matrix());
        s.mean(j) = m;
        s.sd(j) = std::sqrt(std::max(var, 0.0));
        if (s.sd(j) > kConstantColumnSd * (1.0 + std::abs(m))) {
            s.columns.push_back(j);
        }
    }
    s.z.resize(x.rows(), static_cast<Eigen::Index>(s.columns.size()));
    for (std::size_t a = 0; a < s.columns.size(); ++a) {
        const Eigen::Index j = s.columns[a];
        s.z.col(static_cast<Eigen::Index>(a)) = (x.col(j).array() - s.mean(j)) / s.sd(j);
    }
    return s;
}

Eigen::VectorXd geometric_grid(double lambda_max, const PenaltyConfig& config) {
    Eigen::VectorXd grid(static_cast<Eigen::Index>(config.n_lambda));
    const double steps = static_cast<double>(config.n_lambda - 1);
    for (std::size_t t = 0; t < config.n_lambda; ++t) {
        grid(static_cast<Eigen::Index>(t)) = lambda_max * std::pow(config.lambda_min_ratio, static_cast<double>(t) / steps);
    }
    return grid;
}

void check_inputs(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target,
                  Family family, const FitOptions& options) {
    if (x.rows() != target.size()) {
        throw DataError("fit_path: x rows and target length differ");
    }
    if (x.rows() == 0 || x.cols() == 0) {
        throw DataError("fit_path: empty design");
    }
    if (!x.allFinite() || !target.allFinite()) {
        throw DataError("fit_path: non-finite inputs");
    }
    if (family == Family::Logistic) {
        for (Eigen::Index i = 0; i < target.size(); ++i) {
            if (target(i) != 0.0 && target(i) != 1.0) {
                throw DataError("fit_path: logistic target must be 0/1");
            }
        }
    }
    if (options.observation_weights.size() != 0) {
        if (options.observation_weights.size() != target.size()) {
            throw DataError("fit_path: observation weights have the wrong length");
        }
        if (!options.observation_weights.allFinite() || options.observation_weights.minCoeff() < 0.0 ||
            !(options.observation_weights.sum() > 0.0)) {
            throw DataError("fit_path: observation weights must be non-negative with a positive sum");
        }
    }
    if (options.penalty_factors.size() != 0) {
        if (options.penalty_factors.size() != x.cols()) {
            throw DataError("fit_path: penalty factors have the wrong length");
        }
        if (!options.penalty_factors.allFinite() || options.penalty_factors.minCoeff() < 0.0) {
            throw DataError("fit_path: penalty factors must be non-negative");
        }
    }
    if (options.lambdas.size() != 0) {
        for (Eigen::Index t = 0; t < options.lambdas.size(); ++t) {
            if (!(options.lambdas(t) > 0.0) || (t > 0 && !(options.lambdas(t) < options.lambdas(t - 1)))) {
                throw ConfigError("fit_path: supplied lambdas must be positive and strictly decreasing");
            }
        }
    }
}

// Penalised weighted least squares on a centred standardised design, solved
// by covariance-update coordinate descent. The intercept is the weighted mean.
class SquaredErrorSolver {
public:
    SquaredErrorSolver(const Standardized& s, const Eigen::VectorXd& v, const Eigen::Ref<const Eigen::VectorXd>& y)
        : p_(s.z.cols()) {
        intercept_ = v.dot(y);
        const Eigen::MatrixXd vz = s.z.array().colwise() * v.array();
        gram_ = vz.transpose() * s.z;
        cross_ = vz.transpose() * (y.array() - intercept_).matrix();
        beta_ = Eigen::VectorXd::Zero(p_);
        gradient_ = cross_;
    }

    // Returns sweeps used; -1 when max_iter was exhausted.
    long solve(const Eigen::VectorXd& penalty, double lambda, double tol, std::size_t max_iter) {
        for (std::size_t sweep = 1; sweep <= max_iter; ++sweep) {
            double max_delta = 0.0;
            for (Eigen::Index j = 0; j < p_; ++j) {
                const double gjj = gram_(j, j);
                const double old = beta_(j);
                const double updated = soft_threshold(gradient_(j) + gjj * old, lambda * penalty(j)) / gjj;
                const double delta = updated - old;
                if (delta != 0.0) {
                    beta_(j) = updated;
                    gradient_.noalias() -= gram_.col(j) * delta;
                    max_delta = std::max(max_delta, std::abs(delta));
                }
            }
            if (max_delta < tol) {
                return static_cast<long>(sweep);
            }
        }
        return -1;
    }

    [[nodiscard]] const Eigen::VectorXd& beta() const { return beta_; }
    [[nodiscard]] const Eigen::VectorXd& gradient() const { return gradient_; }
    [[nodiscard]] double intercept() const { return intercept_; }

private:
    Eigen::Index p_;
    double intercept_ = 0.0;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd cross_;
    Eigen::VectorXd beta_;
    Eigen::VectorXd gradient_;  // cross - gram * beta
};

// Penalised weighted logistic regression by IRLS with an inner naive-update
// coordinate descent.
class LogisticSolver {
public:
    LogisticSolver(const Standardized& s, const Eigen::VectorXd& v, const Eigen::Ref<const Eigen::VectorXd>& y)
        : z_(s.z), v_(v), y_(y), p_(s.z.cols()) {
        const double ybar = v.dot(y);
        intercept_ = std::log(ybar / (1.0 - ybar));
        beta_ = Eigen::VectorXd::Zero(p_);
        eta_ = Eigen::VectorXd::Constant(y.size(), intercept_);
    }

    long solve(const Eigen::VectorXd& penalty, double lambda, double tol, std::size_t max_iter) {
        std::size_t sweeps = 0;
        const Eigen::Index n = y_.size();
        Eigen::VectorXd w(n);
        Eigen::VectorXd res(n);
        Eigen::VectorXd xw2(p_);
        for (std::size_t outer = 0; outer < kMaxOuter; ++outer) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double prob = sigmoid(eta_(i));
                const double var = std::max(prob * (1.0 - prob), kMinVariance);
                w(i) = v_(i) * var;
                res(i) = (y_(i) - prob) / var;
            }
            const double wsum = w.sum();
            for (Eigen::Index j = 0; j < p_; ++j) {
                xw2(j) = w.dot(z_.col(j).cwiseAbs2());
            }
            const Eigen::VectorXd beta_start = beta_;
            const double intercept_start = intercept_;
            while (true) {
                if (++sweeps > max_iter) {
                    return -1;
                }
                double max_delta = 0.0;
                const double d0 = w.dot(res) / wsum;
                if (d0 != 0.0) {
                    intercept_ += d0;
                    res.array() -= d0;
                    eta_.array() += d0;
                    max_delta = std::abs(d0);
                }
                for (Eigen::Index j = 0; j < p_; ++j) {
                    if (!(xw2(j) > 0.0)) {
                        continue;
                    }
                    const double old = beta_(j);
                    const double g = w.dot(z_.col(j).cwiseProduct(res)) + xw2(j) * old;
                    const double updated = soft_threshold(g, lambda * penalty(j)) / xw2(j);
                    const double delta = updated - old;
                    if (delta != 0.0) {
                        beta_(j) = updated;
                        res.noalias() -= z_.col(j) * delta;
                        eta_.noalias() += z_.col(j) * delta;
                        max_delta = std::max(max_delta, std::abs(delta));
                    }
                }
                if (max_delta < tol) {
                    break;
                }
            }
            if (!beta_.allFinite() || !std::isfinite(intercept_)) {
                throw NumericError("logistic path diverged");
            }
            const double outer_delta =
                std::max((beta_ - beta_start).cwiseAbs().maxCoeff(), std::abs(intercept_ - intercept_start));
            if (p_ == 0 ? std::abs(intercept_ - intercept_start) < tol : outer_delta < tol) {
                return static_cast<long>(sweeps);
            }
        }
        return -1;
    }

    // Gradient of the weighted log likelihood with respect to each slope.
    [[nodiscard]] Eigen::VectorXd gradient() const {
        Eigen::VectorXd resid(y_.size());
        for (Eigen::Index i = 0; i < y_.size(); ++i) {
            resid(i) = v_(i) * (y_(i) - sigmoid(eta_(i)));
        }
        return z_.transpose() * resid;
    }

    [[nodiscard]] const Eigen::VectorXd& beta() const { return beta_; }
    [[nodiscard]] double intercept() const { return intercept_; }

private:
    const Eigen::MatrixXd& z_;
    const Eigen::VectorXd& v_;
    Eigen::Ref<const Eigen::VectorXd> y_;
    Eigen::Index p_;
    double intercept_ = 0.0;
    Eigen::VectorXd beta_;
    Eigen::VectorXd eta_;
};

template <class Solver>
RegressionPath run_path(Solver& solver, const Standardized& s, Eigen::Index p, const Eigen::VectorXd& pf_active,
                        Family family, const PenaltyConfig& config, const FitOptions& options) {
    const auto pa = static_cast<Eigen::Index>(s.columns.size());
    RegressionPath path;
    path.family = family;

    // Null model: only unpenalised slopes may move.
    Eigen::VectorXd penalty(pa);
    bool any_penalized = false;
    for (Eigen::Index a = 0; a < pa; ++a) {
        penalty(a) = pf_active(a) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        any_penalized = any_penalized || pf_active(a) > 0.0;
    }
    const long null_sweeps = solver.solve(penalty, 1.0, config.tol, config.max_iter);

    if (options.lambdas.size() != 0) {
        path.lambdas = options.lambdas;
    } else {
        double lambda_max = 0.0;
        const Eigen::VectorXd grad = solver.gradient();
        for (Eigen::Index a = 0; a < pa; ++a) {
            if (pf_active(a) > 0.0) {
                lambda_max = std::max(lambda_max, std::abs(grad(a)) / pf_active(a));
            }
        }
        if (!(lambda_max > 0.0) || !any_penalized) {
            lambda_max = 1.0;  // every lambda yields the null slopes
        }
        path.lambdas = geometric_grid(lambda_max, config);
    }

    const auto n_lambda = static_cast<std::size_t>(path.lambdas.size());
    path.coefficients = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_lambda), p + 1);
    path.iterations.assign(n_lambda, 0);
    path.converged = null_sweeps >= 0;

    Eigen::VectorXd previous = Eigen::VectorXd::Zero(pa);
    for (std::size_t t = 0; t < n_lambda; ++t) {
        for (Eigen::Index a = 0; a < pa; ++a) {
            penalty(a) = pf_active(a) / (1.0 + config.gamma_pen * std::abs(previous(a)));
        }
        const bool null_point = t == 0 && options.lambdas.size() == 0;
        long sweeps = 0;
        if (!null_point) {
            sweeps = solver.solve(penalty, path.lambdas(static_cast<Eigen::Index>(t)), config.tol, config.max_iter);
        }
        if (sweeps < 0) {
            path.converged = false;
            path.iterations[t] = config.max_iter;
        } else {
            path.iterations[t] = static_cast<std::size_t>(sweeps);
        }
        const Eigen::VectorXd& b = solver.beta();
        previous = b;
        double intercept = solver.intercept();
        for (Eigen::Index a = 0; a < pa; ++a) {
            const Eigen::Index j = s.columns[static_cast<std::size_t>(a)];
            const double slope = b(a) / s.sd(j);
            path.coefficients(static_cast<Eigen::Index>(t), j + 1) = slope;
            intercept -= slope * s.mean(j);
        }
        path.coefficients(static_cast<Eigen::Index>(t), 0) = intercept;
    }
    if (!path.coefficients.allFinite()) {
        throw NumericError("fit_path: non-finite coefficients");
    }
    return path;
}

double held_out_loss(Family family, double target, double prediction) {
    if (family == Family::SquaredError) {
        const double r = target - prediction;
        return r * r;
    }
    const double pr = std::clamp(prediction, 1e-12, 1.0 - 1e-12);
    return -2.0 * (target * std::log(pr) + (1.0 - target) * std::log(1.0 - pr));
}

bool folds_have_both_classes(const Eigen::Ref<const Eigen::VectorXd>& target, std::span<const int> fold_id,
                             std::size_t k) {
    for (std::size_t f = 0; f < k; ++f) {
        std::size_t train_pos = 0, train_neg = 0, test_pos = 0, test_neg = 0;
        for (std::size_t i = 0; i < fold_id.size(); ++i) {
            const bool positive = target(static_cast<Eigen::Index>(i)) == 1.0;
            if (static_cast<std::size_t>(fold_id[i]) == f) {
                (positive ? test_pos : test_neg) += 1;
            } else {
                (positive ? train_pos : train_neg) += 1;
            }
        }
        if (train_pos == 0 || train_neg == 0 || (test_pos == 0 && test_neg == 0)) {
            return false;
        }
    }
    return true;
}

std::vector<Eigen::Index> rows_where(std::span<const int> fold_id, int fold, bool equal) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < fold_id.size(); ++i) {
        if ((fold_id[i] == fold) == equal) {
            rows.push_back(static_cast<Eigen::Index>(i));
        }
    }
    return rows;
}

FitOptions subset_options(const FitOptions& options, const std::vector<Eigen::Index>& rows) {
    FitOptions sub;
    sub.penalty_factors = options.penalty_factors;
    sub.lambdas = options.lambdas;
    if (options.observation_weights.size() != 0) {
        sub.observation_weights = options.observation_weights(rows);
        if (!(sub.observation_weights.sum() > 0.0)) {
            sub.observation_weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(rows.size()));
        }
    }
    return sub;
}

std::size_t fold_count(std::span<const int> fold_id) {
    int k = 0;
    for (int f : fold_id) {
        if (f < 0) {
            throw ConfigError("fold labels must be non-negative");
        }
        k = std::max(k, f + 1);
    }
    return static_cast<std::size_t>(k);
}

}  // namespace

void PenaltyConfig::validate() const {
    if (n_lambda < 2) {
        throw ConfigError("penalty: n_lambda must be at least 2");
    }
    if (!(tol > 0.0)) {
        throw ConfigError("penalty: tol must be positive");
    }
    if (!(gamma_pen >= 0.0) || !std::isfinite(gamma_pen)) {
        throw ConfigError("penalty: gamma_pen must be non-negative");
    }
    if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) {
        throw ConfigError("penalty: lambda_min_ratio must lie in (0, 1)");
    }
    if (max_iter == 0) {
        throw ConfigError("penalty: max_iter must be positive");
    }
}

Eigen::VectorXd RegressionPath::slopes(std::size_t index) const {
    return coefficients.row(static_cast<Eigen::Index>(index)).tail(coefficients.cols() - 1).transpose();
}

Eigen::VectorXd RegressionPath::predict(const Eigen::Ref<const Eigen::MatrixXd>& x, std::size_t index) const {
    const auto t = static_cast<Eigen::Index>(index);
    Eigen::VectorXd eta = x * slopes(index);
    eta.array() += coefficients(t, 0);
    if (family == Family::Logistic) {
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            eta(i) = sigmoid(eta(i));
        }
    }
    return eta;
}

RegressionPath fit_path(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target,
                        Family family, const PenaltyConfig& config, const FitOptions& options) {
    config.validate();
    check_inputs(x, target, family, options);
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();

    Eigen::VectorXd v = options.observation_weights.size() != 0 ? options.observation_weights
                                                                 : Eigen::VectorXd::Ones(n);
    v /= v.sum();

    if (family == Family::Logistic) {
        const double ybar = v.dot(target);
        if (!(ybar > 0.0 && ybar < 1.0)) {
            throw DataError("fit_path: logistic target has a single class");
        }
    }

    const Standardized s = standardize(x, v);
    Eigen::VectorXd pf_active(static_cast<Eigen::Index>(s.columns.size()));
    for (std::size_t a = 0; a < s.columns.size(); ++a) {
        pf_active(static_cast<Eigen::Index>(a)) =
            options.penalty_factors.size() != 0 ? options.penalty_factors(s.columns[a]) : 1.0;
    }

    if (family == Family::SquaredError) {
        SquaredErrorSolver solver(s, v, target);
        return run_path(solver, s, p, pf_active, family, config, options);
    }
    LogisticSolver solver(s, v, target);
    return run_path(solver, s, p, pf_active, family, config, options);
}

std::vector<int> assign_folds(std::size_t n, std::size_t k_folds, std::uint64_t seed, const Eigen::VectorXd* strata) {
    if (k_folds < 2) {
        throw ConfigError("cross-validation needs at least 2 folds");
    }
    if (n < k_folds) {
        throw ConfigError("cross-validation needs at least as many rows as folds");
    }
    Rng rng = make_rng(seed, "folds");
    std::vector<int> fold(n, 0);
    auto deal = [&](std::vector<std::size_t> members, std::size_t offset) {
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t i = 0; i < members.size(); ++i) {
            fold[members[i]] = static_cast<int>((offset + i) % k_folds);
        }
        return offset + members.size();
    };
    if (strata == nullptr) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        deal(std::move(all), 0);
        return fold;
    }
    std::vector<std::size_t> negative, positive;
    for (std::size_t i = 0; i < n; ++i) {
        ((*strata)(static_cast<Eigen::Index>(i)) == 1.0 ? positive : negative).push_back(i);
    }
    const std::size_t offset = deal(std::move(negative), 0);
    deal(std::move(positive), offset);
    return fold;
}

RegressionPath cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target,
                              Family family, const PenaltyConfig& config, std::size_t k_folds, std::uint64_t seed,
                              const FitOptions& options) {
    std::vector<int> folds = assign_folds(static_cast<std::size_t>(x.rows()), k_folds, seed);
    if (family == Family::Logistic && !folds_have_both_classes(target, folds, k_folds)) {
        const Eigen::VectorXd strata = target;
        folds = assign_folds(static_cast<std::size_t>(x.rows()), k_folds, seed, &strata);
    }
    return cross_validate(x, target, family, config, folds, options);
}

RegressionPath cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target,
                              Family family, const PenaltyConfig& config, std::span<const int> fold_id,
                              const FitOptions& options) {
    if (fold_id.size() != static_cast<std::size_t>(x.rows())) {
        throw DataError("cross_validate: fold labels have the wrong length");
    }
    const std::size_t k = fold_count(fold_id);
    if (k < 2) {
        throw ConfigError("cross-validation needs at least 2 folds");
    }
    RegressionPath path = fit_path(x, target, family, config, options);
    const Eigen::Index n_lambda = path.lambdas.size();

    CvErrors cv;
    cv.fold_loss.resize(static_cast<Eigen::Index>(k), n_lambda);
    for (std::size_t f = 0; f < k; ++f) {
        const auto train = rows_where(fold_id, static_cast<int>(f), false);
        const auto test = rows_where(fold_id, static_cast<int>(f), true);
        if (test.empty() || train.empty()) {
            throw ConfigError("cross_validate: empty fold " + std::to_string(f));
        }
        FitOptions sub = subset_options(options, train);
        sub.lambdas = path.lambdas;
        const Eigen::MatrixXd x_train = x(train, Eigen::all);
        const Eigen::VectorXd y_train = target(train);
        const RegressionPath fold_path = fit_path(x_train, y_train, family, config, sub);
        path.converged = path.converged && fold_path.converged;

        const Eigen::MatrixXd x_test = x(test, Eigen::all);
        Eigen::VectorXd v_test = options.observation_weights.size() != 0 ? Eigen::VectorXd(options.observation_weights(test))
                                                                         : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(test.size()));
        if (!(v_test.sum() > 0.0)) {
            v_test.setOnes();
        }
        const double vsum = v_test.sum();
        for (Eigen::Index t = 0; t < n_lambda; ++t) {
            const Eigen::VectorXd pred = fold_path.predict(x_test, static_cast<std::size_t>(t));
            double loss = 0.0;
            for (std::size_t i = 0; i < test.size(); ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                loss += v_test(ii) * held_out_loss(family, target(test[i]), pred(ii));
            }
            cv.fold_loss(static_cast<Eigen::Index>(f), t) = loss / vsum;
        }
    }
    const double kd = static_cast<double>(k);
    cv.mean = cv.fold_loss.colwise().mean().transpose();
    cv.se.resize(n_lambda);
    for (Eigen::Index t = 0; t < n_lambda; ++t) {
        const double ss = (cv.fold_loss.col(t).array() - cv.mean(t)).square().sum();
        cv.se(t) = std::sqrt(ss / (kd - 1.0)) / std::sqrt(kd);
    }
    path.cv = std::move(cv);
    return path;
}

std::size_t select_lambda(const CvErrors& cv, CvRule rule) {
    if (cv.mean.size() == 0) {
        throw DataError("select_lambda: empty cross-validation curve");
    }
    std::size_t best = 0;
    for (Eigen::Index t = 1; t < cv.mean.size(); ++t) {
        if (cv.mean(t) < cv.mean(static_cast<Eigen::Index>(best))) {
            best = static_cast<std::size_t>(t);
        }
    }
    if (rule == CvRule::MinCV) {
        return best;
    }
    const auto b = static_cast<Eigen::Index>(best);
    const double threshold = cv.mean(b) + cv.se(b);
    for (Eigen::Index t = 0; t <= b; ++t) {
        if (cv.mean(t) <= threshold) {
            return static_cast<std::size_t>(t);
        }
    }
    return best;
}

std::size_t select_lambda(const RegressionPath& path, CvRule rule) {
    if (!path.cv) {
        throw DataError("select_lambda: path has no cross-validation errors");
    }
    return select_lambda(*path.cv, rule);
}

OutOfFoldFit out_of_fold(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target,
                         Family family, const PenaltyConfig& config, std::span<const int> fold_id,
                         std::size_t inner_folds, std::uint64_t seed, const FitOptions& options,
                         const Eigen::MatrixXd* prediction_x) {
    if (fold_id.size() != static_cast<std::size_t>(x.rows())) {
        throw DataError("out_of_fold: fold labels have the wrong length");
    }
    if (prediction_x != nullptr && (prediction_x->rows() != x.rows() || prediction_x->cols() != x.cols())) {
        throw DataError("out_of_fold: prediction design has the wrong shape");
    }
    const std::size_t k = fold_count(fold_id);
    OutOfFoldFit fit;
    fit.min_cv = Eigen::VectorXd::Zero(x.rows());
    fit.one_se = Eigen::VectorXd::Zero(x.rows());
    for (std::size_t f = 0; f < k; ++f) {
        const auto train = rows_where(fold_id, static_cast<int>(f), false);
        const auto test = rows_where(fold_id, static_cast<int>(f), true);
        if (test.empty()) {
            continue;
        }
        const Eigen::MatrixXd x_train = x(train, Eigen::all);
        const Eigen::VectorXd y_train = target(train);
        const FitOptions sub = subset_options(options, train);
        const RegressionPath path =
            cross_validate(x_train, y_train, family, config, inner_folds, derive_seed(seed, "inner_cv", f), sub);
        fit.converged = fit.converged && path.converged;
        const std::size_t i_min = select_lambda(path, CvRule::MinCV);
        const std::size_t i_1se = select_lambda(path, CvRule::OneSE);
        fit.min_cv_index.push_back(i_min);
        fit.one_se_index.push_back(i_1se);

        const Eigen::MatrixXd x_test = prediction_x != nullptr ? Eigen::MatrixXd((*prediction_x)(test, Eigen::all))
                                                               : Eigen::MatrixXd(x(test, Eigen::all));
        const Eigen::VectorXd pred_min = path.predict(x_test, i_min);
        const Eigen::VectorXd pred_1se = path.predict(x_test, i_1se);
        for (std::size_t i = 0; i < test.size(); ++i) {
            fit.min_cv(test[i]) = pred_min(static_cast<Eigen::Index>(i));
            fit.one_se(test[i]) = pred_1se(static_cast<Eigen::Index>(i));
        }
    }
    return fit;
}

PropensityFit fit_propensity(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& d,
                             const PenaltyConfig& config, std::size_t k_folds, std::uint64_t seed, CvRule rule) {
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d(i) != 0.0 && d(i) != 1.0) {
            throw DataError("fit_propensity: treatment must be binary");
        }
    }
    if (d.size() == 0 || d.minCoeff() == d.maxCoeff()) {
        throw DataError("degenerate treatment");
    }
    const Eigen::VectorXd strata = d;
    PropensityFit out;
    out.fold_id = assign_folds(static_cast<std::size_t>(d.size()), k_folds, seed, &strata);
    const OutOfFoldFit fit = out_of_fold(x, d, Family::Logistic, config, out.fold_id, k_folds,
                                         derive_seed(seed, "propensity"));
    out.e_hat = fit.predictions(rule).cwiseMax(kPropensityClip).cwiseMin(1.0 - kPropensityClip);
    return out;
}

}  // namespace ato::lasso
