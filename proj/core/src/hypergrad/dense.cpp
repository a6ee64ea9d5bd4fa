#include "onepass/hypergrad/dense.hpp"

#include "mask.hpp"

namespace onepass::hypergrad {
namespace {

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Hypergradient from_indirect(const DenseJacobians& d, const Eigen::VectorXd& indirect,
                            const update::HyperVector& lambda) {
  Hypergradient h;
  h.direct = to_std(d.dlv_dlambda);
  h.indirect = to_std(indirect);
  return detail::finish(std::move(h), lambda);
}

}  // namespace

DenseJacobians dense_jacobians(const LinearisedUpdate& lin, const ValidationGrad& vg) {
  const auto P = static_cast<Eigen::Index>(lin.weight_count());
  const auto H = static_cast<Eigen::Index>(vg.dlambda.size());
  DenseJacobians d;
  d.du_dw.resize(P, P);
  d.du_dlambda.resize(P, H);
  std::vector<double> unit(P, 0.0);
  for (Eigen::Index r = 0; r < P; ++r) {
    unit[r] = 1.0;
    const ad::TensorList seed = ad::unflatten(unit, lin.weights());
    d.du_dw.row(r) = to_eigen(ad::flatten(lin.vjp_w(seed)));
    d.du_dlambda.row(r) = to_eigen(lin.vjp_lambda(seed));
    unit[r] = 0.0;
  }
  d.dlv_dw = to_eigen(ad::flatten(vg.dw));
  d.dlv_dlambda = to_eigen(vg.dlambda);
  return d;
}

Hypergradient dense_series_hypergradient(const DenseJacobians& d, std::size_t i, const update::HyperVector& lambda) {
  const Eigen::Index P = d.du_dw.rows();
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(P, P) - d.du_dw;
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(P, P);
  Eigen::MatrixXd sum = power;
  for (std::size_t j = 1; j <= i; ++j) {
    power = power * M;
    sum += power;
  }
  const Eigen::VectorXd indirect = -(d.dlv_dw.transpose() * sum * d.du_dlambda).transpose();
  return from_indirect(d, indirect, lambda);
}

Hypergradient dense_solve_hypergradient(const DenseJacobians& d, const update::HyperVector& lambda) {
  // g^T J^{-1} = (J^{-T} g)^T.
  const Eigen::VectorXd y = d.du_dw.transpose().fullPivLu().solve(d.dlv_dw);
  const Eigen::VectorXd indirect = -(y.transpose() * d.du_dlambda).transpose();
  return from_indirect(d, indirect, lambda);
}

}  // namespace onepass::hypergrad
