#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "qclean/error.hpp"
#include "qclean/textenc.hpp"
#include "qclean/vae/model.hpp"
#include "qclean/vae/params.hpp"

namespace qclean::vae {

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_ce = 0.0;
  double mean_kl = 0.0;
  double mean_total = 0.0;  // ce + beta * kl, with the beta in effect at each step
  double seconds = 0.0;
};

struct TrainResult {
  VaeParams params;
  std::vector<EpochStats> trace;
};

using EpochCallback = std::function<void(const EpochStats&)>;

inline constexpr double kInitScale = 0.08;

// Linear KL warm-up: 0 at the first update, 1 from update `anneal_steps` on.
inline double kl_weight(std::size_t step, std::size_t anneal_steps) {
  if (anneal_steps == 0) return 1.0;
  return std::min(1.0, static_cast<double>(step) / static_cast<double>(anneal_steps));
}

class Adam {
 public:
  explicit Adam(const VaeConfig& c, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(VaeParams::zeros(c)), v_(VaeParams::zeros(c)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(VaeParams& params, const VaeParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    VaeParams::zip(
        [&](const std::string&, auto& p, const auto& g, auto& m, auto& v) {
          m = beta1_ * m + (1.0 - beta1_) * g;
          v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
          p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
        },
        params, grad, m_, v_);
  }

 private:
  VaeParams m_;
  VaeParams v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Mini-batch Adam on the ELBO. The corpus is put in canonical (sorted)
/// order before seeded shuffling, so the result depends on the seed and the
/// corpus contents but not on the order of the input.
inline TrainResult train(std::vector<IdSeq> corpus, const VaeConfig& config, const EpochCallback& on_epoch = {}) {
  config.validate();
  if (corpus.empty()) throw Error(ErrorKind::empty_corpus, "training corpus is empty");
  std::sort(corpus.begin(), corpus.end());

  std::mt19937_64 rng(config.seed);
  TrainResult result{VaeParams::uniform(config, rng(), kInitScale), {}};
  VaeParams& params = result.params;
  VaeParams grad = VaeParams::zeros(config);
  Adam adam(config, config.learning_rate);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto z_dim = static_cast<Eigen::Index>(config.z_dim);

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - b);
      const double beta = kl_weight(step, config.kl_anneal_steps);
      grad.set_zero();
      double batch_total = 0.0;
      for (std::size_t k = b; k < end; ++k) {
        VectorXd r(z_dim);
        for (Eigen::Index j = 0; j < z_dim; ++j) r(j) = normal(rng);
        LossBreakdown loss = loss_and_gradient(params, corpus[order[k]], r, beta, grad, weight);
        stats.mean_ce += loss.ce;
        stats.mean_kl += loss.kl;
        stats.mean_total += loss.total;
        batch_total += loss.total;
      }
      if (!std::isfinite(batch_total) || !grad.all_finite())
        throw Error(ErrorKind::numeric, "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                            std::to_string(step + 1));
      adam.step(params, grad);
      ++step;
      if (!params.all_finite())
        throw Error(ErrorKind::numeric, "non-finite parameters after epoch " + std::to_string(epoch) +
                                            ", step " + std::to_string(step));
    }
    const auto n = static_cast<double>(corpus.size());
    stats.mean_ce /= n;
    stats.mean_kl /= n;
    stats.mean_total /= n;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trace.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

}  // namespace qclean::vae
