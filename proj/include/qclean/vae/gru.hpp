#pragma once

#include <Eigen/Dense>

#include "qclean/vae/params.hpp"

namespace qclean::vae {

// Activations of one GRU step, kept for the backward pass.
struct GruStepCache {
  VectorXd x;
  VectorXd h_prev;
  VectorXd z;
  VectorXd r;
  VectorXd n;
};

inline VectorXd sigmoid(const VectorXd& a) {
  return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

inline VectorXd gru_step(const GruWeights& w, const VectorXd& x, const VectorXd& h_prev,
                         GruStepCache* cache = nullptr) {
  VectorXd z = sigmoid(w.w_z * x + w.u_z * h_prev + w.b_z);
  VectorXd r = sigmoid(w.w_r * x + w.u_r * h_prev + w.b_r);
  VectorXd rh = r.cwiseProduct(h_prev);
  VectorXd n = (w.w_n * x + w.u_n * rh + w.b_n).array().tanh().matrix();
  VectorXd h = z.cwiseProduct(h_prev) + (1.0 - z.array()).matrix().cwiseProduct(n);
  if (cache != nullptr) *cache = GruStepCache{x, h_prev, std::move(z), std::move(r), std::move(n)};
  return h;
}

/// Accumulates weight gradients of one step into `grad` and returns the
/// gradients with respect to the step input (dx) and previous state (dh_prev).
inline void gru_step_backward(const GruWeights& w, const GruStepCache& c, const VectorXd& dh,
                              GruWeights& grad, VectorXd& dx, VectorXd& dh_prev) {
  const auto& z = c.z.array();
  const auto& r = c.r.array();
  const auto& n = c.n.array();
  const auto& hp = c.h_prev.array();
  const auto& g = dh.array();

  VectorXd da_n = (g * (1.0 - z) * (1.0 - n * n)).matrix();
  VectorXd da_z = (g * (hp - n) * z * (1.0 - z)).matrix();
  VectorXd rh = (r * hp).matrix();
  VectorXd drh = w.u_n.transpose() * da_n;
  VectorXd da_r = (drh.array() * hp * r * (1.0 - r)).matrix();

  grad.w_n.noalias() += da_n * c.x.transpose();
  grad.u_n.noalias() += da_n * rh.transpose();
  grad.b_n += da_n;
  grad.w_z.noalias() += da_z * c.x.transpose();
  grad.u_z.noalias() += da_z * c.h_prev.transpose();
  grad.b_z += da_z;
  grad.w_r.noalias() += da_r * c.x.transpose();
  grad.u_r.noalias() += da_r * c.h_prev.transpose();
  grad.b_r += da_r;

  dx.noalias() = w.w_n.transpose() * da_n;
  dx.noalias() += w.w_z.transpose() * da_z;
  dx.noalias() += w.w_r.transpose() * da_r;

  dh_prev = (g * z + drh.array() * r).matrix();
  dh_prev.noalias() += w.u_z.transpose() * da_z;
  dh_prev.noalias() += w.u_r.transpose() * da_r;
}

}  // namespace qclean::vae
