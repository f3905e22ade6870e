#pragma once

// GRU variational auto-encoder: bidirectional GRU encoder whose two final
// states are summed, a Gaussian latent layer with the reparameterization
// z = mu + r * exp(logvar / 2), and a GRU decoder whose initial state is an
// affine map of z. The decoder is teacher-forced: step i reads the true
// token ids[i] and predicts ids[i + 1].

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qclean/error.hpp"
#include "qclean/textenc.hpp"
#include "qclean/vae/gru.hpp"
#include "qclean/vae/params.hpp"

namespace qclean::vae {

struct LossBreakdown {
  double ce = 0.0;     // mean cross-entropy per predicted token, nats
  double kl = 0.0;     // KL(q(z|x) || N(0, I)), nats
  double beta = 1.0;   // KL weight
  double total = 0.0;  // ce + beta * kl
};

struct EncoderTrace {
  std::vector<GruStepCache> fwd;  // fwd[i] consumed ids[i]
  std::vector<GruStepCache> bwd;  // bwd[i] consumed ids[i]
};

struct Latent {
  VectorXd mu;
  VectorXd logvar;
  VectorXd z;
};

struct DecoderTrace {
  VectorXd z;
  std::vector<GruStepCache> steps;
  std::vector<VectorXd> states;
};

namespace detail {

inline void check_ids(const VaeParams& p, const IdSeq& ids) {
  const auto vocab = p.embedding.rows();
  for (TokenId id : ids)
    if (id < 0 || id >= vocab)
      throw Error(ErrorKind::invalid_argument,
                  "token id " + std::to_string(id) + " out of range for vocabulary of size " + std::to_string(vocab));
}

inline VectorXd embed(const VaeParams& p, TokenId id) { return p.embedding.row(id).transpose(); }

inline double log_sum_exp(const VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace detail

inline VectorXd softmax(const VectorXd& logits) {
  VectorXd e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// h = (last forward state) + (last backward state), both GRUs starting at 0.
inline VectorXd encoder_forward(const VaeParams& p, const IdSeq& ids, EncoderTrace* trace = nullptr) {
  if (ids.empty()) throw Error(ErrorKind::invalid_argument, "encoder input must not be empty");
  detail::check_ids(p, ids);
  const auto h_dim = p.enc_fwd.u_z.rows();
  const std::size_t n = ids.size();
  if (trace != nullptr) {
    trace->fwd.assign(n, {});
    trace->bwd.assign(n, {});
  }
  VectorXd hf = VectorXd::Zero(h_dim);
  for (std::size_t i = 0; i < n; ++i)
    hf = gru_step(p.enc_fwd, detail::embed(p, ids[i]), hf, trace ? &trace->fwd[i] : nullptr);
  VectorXd hb = VectorXd::Zero(h_dim);
  for (std::size_t i = n; i-- > 0;)
    hb = gru_step(p.enc_bwd, detail::embed(p, ids[i]), hb, trace ? &trace->bwd[i] : nullptr);
  return hf + hb;
}

inline Latent latent(const VaeParams& p, const VectorXd& h, const VectorXd& r) {
  const auto z_dim = p.latent_w.rows() / 2;
  if (r.size() != z_dim) throw Error(ErrorKind::invalid_argument, "noise vector has wrong size");
  VectorXd a = p.latent_w * h + p.latent_b;
  Latent out;
  out.mu = a.head(z_dim);
  out.logvar = a.tail(z_dim);
  out.z = out.mu + r.cwiseProduct((0.5 * out.logvar.array()).exp().matrix());
  return out;
}

/// One logit vector per predicted position: logits[i] scores ids[i + 1].
inline std::vector<VectorXd> decoder_forward(const VaeParams& p, const VectorXd& z, const IdSeq& targets,
                                             DecoderTrace* trace = nullptr) {
  if (targets.size() < 2 || targets.front() != special::bos || targets.back() != special::eos)
    throw Error(ErrorKind::invalid_argument, "decoder targets must start with BOS and end with EOS");
  detail::check_ids(p, targets);
  const std::size_t steps = targets.size() - 1;
  VectorXd s = p.dec_init_w * z + p.dec_init_b;
  if (trace != nullptr) {
    trace->z = z;
    trace->steps.assign(steps, {});
    trace->states.assign(steps, {});
  }
  std::vector<VectorXd> logits;
  logits.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    s = gru_step(p.dec, detail::embed(p, targets[i]), s, trace ? &trace->steps[i] : nullptr);
    if (trace != nullptr) trace->states[i] = s;
    logits.push_back(p.out_w * s + p.out_b);
  }
  return logits;
}

inline double kl_divergence(const VectorXd& mu, const VectorXd& logvar) {
  return 0.5 * (mu.array().square() + logvar.array().exp() - logvar.array() - 1.0).sum();
}

inline LossBreakdown elbo_loss(const std::vector<VectorXd>& logits, const IdSeq& targets, const VectorXd& mu,
                               const VectorXd& logvar, double beta = 1.0) {
  if (logits.empty() || targets.size() != logits.size() + 1)
    throw Error(ErrorKind::invalid_argument, "logits and targets are not aligned");
  double ce = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    ce += detail::log_sum_exp(logits[i]) - logits[i](targets[i + 1]);
  LossBreakdown out;
  out.ce = ce / static_cast<double>(logits.size());
  out.kl = kl_divergence(mu, logvar);
  out.beta = beta;
  out.total = out.ce + beta * out.kl;
  return out;
}

/// Mean per-token cross-entropy with z fixed to the posterior mean. KL is not
/// part of the score.
inline double reconstruction_loss(const VaeParams& p, const IdSeq& ids) {
  VectorXd h = encoder_forward(p, ids);
  const auto z_dim = p.latent_w.rows() / 2;
  VectorXd mu = p.latent_w.topRows(z_dim) * h + p.latent_b.head(z_dim);
  auto logits = decoder_forward(p, mu, ids);
  double ce = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    ce += detail::log_sum_exp(logits[i]) - logits[i](ids[i + 1]);
  return ce / static_cast<double>(logits.size());
}

/// Loss of one sequence for a given noise draw, with `weight` times its
/// gradient added into `grad`.
inline LossBreakdown loss_and_gradient(const VaeParams& p, const IdSeq& ids, const VectorXd& r, double beta,
                                       VaeParams& grad, double weight = 1.0) {
  EncoderTrace enc;
  VectorXd h = encoder_forward(p, ids, &enc);
  Latent lat = latent(p, h, r);
  DecoderTrace dec;
  auto logits = decoder_forward(p, lat.z, ids, &dec);
  LossBreakdown loss = elbo_loss(logits, ids, lat.mu, lat.logvar, beta);

  const std::size_t steps = logits.size();
  const double ce_scale = weight / static_cast<double>(steps);
  const auto h_dim = p.dec.u_z.rows();

  // Decoder, last step first.
  VectorXd ds = VectorXd::Zero(h_dim);
  VectorXd dx, ds_prev;
  for (std::size_t i = steps; i-- > 0;) {
    VectorXd dlogit = softmax(logits[i]);
    dlogit(ids[i + 1]) -= 1.0;
    dlogit *= ce_scale;
    grad.out_w.noalias() += dlogit * dec.states[i].transpose();
    grad.out_b += dlogit;
    ds.noalias() += p.out_w.transpose() * dlogit;
    gru_step_backward(p.dec, dec.steps[i], ds, grad.dec, dx, ds_prev);
    grad.embedding.row(ids[i]) += dx.transpose();
    ds = ds_prev;
  }

  // Initial decoder state s = W z + b.
  grad.dec_init_w.noalias() += ds * lat.z.transpose();
  grad.dec_init_b += ds;
  VectorXd dz = p.dec_init_w.transpose() * ds;

  // Reparameterization and KL term.
  const auto z_dim = lat.mu.size();
  VectorXd sigma = (0.5 * lat.logvar.array()).exp().matrix();
  VectorXd dlat(2 * z_dim);
  dlat.head(z_dim) = dz + (weight * beta) * lat.mu;
  dlat.tail(z_dim) = (0.5 * dz.array() * r.array() * sigma.array() +
                      (0.5 * weight * beta) * (lat.logvar.array().exp() - 1.0))
                         .matrix();
  grad.latent_w.noalias() += dlat * h.transpose();
  grad.latent_b += dlat;
  VectorXd dh = p.latent_w.transpose() * dlat;

  // Encoder: both directions receive dh at their final state.
  const std::size_t n = ids.size();
  VectorXd dhf = dh;
  for (std::size_t i = n; i-- > 0;) {
    gru_step_backward(p.enc_fwd, enc.fwd[i], dhf, grad.enc_fwd, dx, ds_prev);
    grad.embedding.row(ids[i]) += dx.transpose();
    dhf = ds_prev;
  }
  VectorXd dhb = dh;
  for (std::size_t i = 0; i < n; ++i) {
    gru_step_backward(p.enc_bwd, enc.bwd[i], dhb, grad.enc_bwd, dx, ds_prev);
    grad.embedding.row(ids[i]) += dx.transpose();
    dhb = ds_prev;
  }
  return loss;
}

}  // namespace qclean::vae
