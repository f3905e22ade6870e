#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "qclean/error.hpp"

namespace qclean::vae {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct VaeConfig {
  std::size_t d = 128;       // embedding dimension
  std::size_t h_dim = 256;   // GRU hidden size
  std::size_t z_dim = 64;    // latent size
  std::size_t o_w = 0;       // vocabulary size, filled in from the vocabulary
  std::size_t max_len = 20;  // tokens per encoded sequence, BOS/EOS included
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t kl_anneal_steps = 2000;
  std::uint64_t seed = 42;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::invalid_argument, "vae config: " + m); };
    if (d < 1 || h_dim < 1 || z_dim < 1) fail("dimensions must be >= 1");
    if (o_w <= 4) fail("vocabulary size must exceed the 4 special tokens");
    if (max_len < 3) fail("max_len must be >= 3");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  }

  friend bool operator==(const VaeConfig&, const VaeConfig&) = default;
};

// Gate layout: z = update, r = reset, n = candidate.
//   z = sigmoid(W_z x + U_z h + b_z)
//   r = sigmoid(W_r x + U_r h + b_r)
//   n = tanh(W_n x + U_n (r * h) + b_n)
//   h' = z * h + (1 - z) * n
struct GruWeights {
  MatrixXd w_z, w_r, w_n;  // h x in
  MatrixXd u_z, u_r, u_n;  // h x h
  VectorXd b_z, b_r, b_n;  // h

  static GruWeights zeros(std::size_t in, std::size_t h) {
    auto hi = static_cast<Eigen::Index>(h);
    auto ii = static_cast<Eigen::Index>(in);
    return GruWeights{MatrixXd::Zero(hi, ii), MatrixXd::Zero(hi, ii), MatrixXd::Zero(hi, ii),
                      MatrixXd::Zero(hi, hi), MatrixXd::Zero(hi, hi), MatrixXd::Zero(hi, hi),
                      VectorXd::Zero(hi),     VectorXd::Zero(hi),     VectorXd::Zero(hi)};
  }
};

template <class F, class... G>
void zip_gru(std::string_view prefix, F& f, G&... g) {
  const std::string p(prefix);
  f(p + ".w_z", g.w_z...);
  f(p + ".w_r", g.w_r...);
  f(p + ".w_n", g.w_n...);
  f(p + ".u_z", g.u_z...);
  f(p + ".u_r", g.u_r...);
  f(p + ".u_n", g.u_n...);
  f(p + ".b_z", g.b_z...);
  f(p + ".b_r", g.b_r...);
  f(p + ".b_n", g.b_n...);
}

struct VaeParams {
  MatrixXd embedding;   // o_w x d, shared by encoder and decoder
  GruWeights enc_fwd;   // input d
  GruWeights enc_bwd;   // input d
  MatrixXd latent_w;    // 2*z_dim x h_dim; rows [0, z) -> mu, [z, 2z) -> log variance
  VectorXd latent_b;
  MatrixXd dec_init_w;  // h_dim x z_dim; decoder initial state from z
  VectorXd dec_init_b;
  GruWeights dec;       // input d
  MatrixXd out_w;       // o_w x h_dim
  VectorXd out_b;

  static VaeParams zeros(const VaeConfig& c) {
    auto i = [](std::size_t n) { return static_cast<Eigen::Index>(n); };
    VaeParams p;
    p.embedding = MatrixXd::Zero(i(c.o_w), i(c.d));
    p.enc_fwd = GruWeights::zeros(c.d, c.h_dim);
    p.enc_bwd = GruWeights::zeros(c.d, c.h_dim);
    p.latent_w = MatrixXd::Zero(i(2 * c.z_dim), i(c.h_dim));
    p.latent_b = VectorXd::Zero(i(2 * c.z_dim));
    p.dec_init_w = MatrixXd::Zero(i(c.h_dim), i(c.z_dim));
    p.dec_init_b = VectorXd::Zero(i(c.h_dim));
    p.dec = GruWeights::zeros(c.d, c.h_dim);
    p.out_w = MatrixXd::Zero(i(c.o_w), i(c.h_dim));
    p.out_b = VectorXd::Zero(i(c.o_w));
    return p;
  }

  /// Every entry uniform in [-scale, scale], drawn in tensor visit order.
  static VaeParams uniform(const VaeConfig& c, std::uint64_t seed, double scale = 0.08) {
    VaeParams p = zeros(c);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    p.for_each([&](const std::string&, auto& t) {
      for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = dist(rng);
    });
    return p;
  }

  template <class F>
  void for_each(F&& f) { zip(f, *this); }
  template <class F>
  void for_each(F&& f) const { zip(f, *this); }

  /// Calls f(name, tensor_of_each_argument...) for every tensor, in a fixed
  /// order shared by initialization, optimizer state and checkpoints.
  template <class F, class... P>
  static void zip(F&& f, P&... p) {
    f(std::string("embedding"), p.embedding...);
    zip_gru("enc_fwd", f, p.enc_fwd...);
    zip_gru("enc_bwd", f, p.enc_bwd...);
    f(std::string("latent_w"), p.latent_w...);
    f(std::string("latent_b"), p.latent_b...);
    f(std::string("dec_init_w"), p.dec_init_w...);
    f(std::string("dec_init_b"), p.dec_init_b...);
    zip_gru("dec", f, p.dec...);
    f(std::string("out_w"), p.out_w...);
    f(std::string("out_b"), p.out_b...);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }

  void set_zero() {
    for_each([](const std::string&, auto& t) { t.setZero(); });
  }
};

}  // namespace qclean::vae
