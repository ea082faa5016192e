#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "ato/gamma_lasso.hpp"

namespace ato {

// Which lambda each outer fold used for each nuisance.
struct FoldLog {
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t outcome_index = 0;
    std::size_t treatment_index = 0;
    std::size_t net_outcome_index = 0;  // only meaningful when g0_hat is present
};

// Out-of-fold nuisance predictions. Every unit's entries come from models
// trained without its fold.
struct NuisanceEstimates {
    Eigen::VectorXd m_hat;   // E[D | X]
    Eigen::VectorXd g_hat;   // E[Y | X]
    Eigen::VectorXd e_hat;   // propensity, clipped to [1e-6, 1 - 1e-6]
    Eigen::VectorXd g0_hat;  // E[Y - D theta | X] from a joint fit; empty unless requested
    std::vector<int> fold_id;
    std::vector<FoldLog> folds;
    lasso::CvRule rule = lasso::CvRule::MinCV;
    bool folds_converged = true;

    [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(m_hat.size()); }
};

}  // namespace ato
