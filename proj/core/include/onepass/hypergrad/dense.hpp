#pragma once

#include <Eigen/Dense>

#include "onepass/hypergrad/hypergrad.hpp"

namespace onepass::hypergrad {

/// Dense Jacobians of one update step, assembled from unit-seed products.
/// Only meant for small models.
struct DenseJacobians {
  Eigen::MatrixXd du_dw;       ///< P x P
  Eigen::MatrixXd du_dlambda;  ///< P x H
  Eigen::VectorXd dlv_dw;      ///< P
  Eigen::VectorXd dlv_dlambda; ///< H
};

DenseJacobians dense_jacobians(const LinearisedUpdate& lin, const ValidationGrad& vg);

/// g^T sum_{j=0..i} (I - du/dw)^j du/dlambda, with the matrix powers formed
/// explicitly.
Hypergradient dense_series_hypergradient(const DenseJacobians& d, std::size_t i, const update::HyperVector& lambda);

/// Limit of the series, -g^T (du/dw)^{-1} du/dlambda, by a dense solve.
Hypergradient dense_solve_hypergradient(const DenseJacobians& d, const update::HyperVector& lambda);

}  // namespace onepass::hypergrad
