#pragma once

// Splitting scored comments into a qualified (low loss) and an unqualified
// group: a two-component 1-D Gaussian mixture fitted by EM, with fixed
// percentile and 2-means alternatives.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qclean/error.hpp"

namespace qclean {

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr std::size_t kMinGmmSamples = 10;

struct GmmFit {
  double pi = 0.5;  // weight of the qualified (lower-mean) component
  double mu_q = 0.0;
  double sigma_q = 1.0;
  double mu_uq = 0.0;
  double sigma_uq = 1.0;
  double threshold = 0.0;
  std::vector<double> loglik_trace;  // total log-likelihood at each E-step
};

inline double normal_log_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Linear-interpolation quantile of already sorted data, q in [0, 1].
inline double sorted_quantile(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// log(pi N(x|q)) - log((1 - pi) N(x|uq)); positive where the qualified
/// component is the more responsible one.
inline double log_posterior_ratio(const GmmFit& f, double x) {
  return std::log(f.pi) + normal_log_pdf(x, f.mu_q, f.sigma_q) - std::log1p(-f.pi) -
         normal_log_pdf(x, f.mu_uq, f.sigma_uq);
}

/// The point between the two means where both components are equally
/// responsible, by bisection. If the posterior does not cross 0.5 inside
/// (mu_q, mu_uq) the midpoint of the means is returned.
inline double decision_threshold(const GmmFit& f) {
  double lo = f.mu_q;
  double hi = f.mu_uq;
  const double mid = 0.5 * (lo + hi);
  if (!(hi > lo)) return mid;
  double f_lo = log_posterior_ratio(f, lo);
  const double f_hi = log_posterior_ratio(f, hi);
  if (!(f_lo > 0.0 && f_hi < 0.0)) return mid;
  while (hi - lo > 1e-12 * std::max(1.0, std::abs(hi))) {
    const double m = 0.5 * (lo + hi);
    if (m <= lo || m >= hi) break;
    const double f_m = log_posterior_ratio(f, m);
    if (f_m > 0.0) {
      lo = m;
      f_lo = f_m;
    } else {
      hi = m;
    }
  }
  return 0.5 * (lo + hi);
}

/// EM for P(x) = pi N(x|mu_q, sigma_q) + (1 - pi) N(x|mu_uq, sigma_uq).
/// Starts from the 25th/75th percentiles, the overall standard deviation and
/// pi = 0.5; stops once the log-likelihood gain drops below `tol`.
inline GmmFit fit_em_gmm(std::span<const double> losses, std::size_t max_iter = 500, double tol = 1e-8) {
  const std::size_t n = losses.size();
  if (n < kMinGmmSamples)
    throw Error(ErrorKind::invalid_argument, "EM-GMM needs at least " + std::to_string(kMinGmmSamples) +
                                                 " samples; use the percentile strategy for smaller inputs");
  // Sorted order fixes the summation order, so the fit does not depend on
  // how the input is permuted.
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back())
    throw Error(ErrorKind::invalid_argument, "EM-GMM needs at least two distinct values; use the percentile strategy");
  for (double x : sorted)
    if (!std::isfinite(x)) throw Error(ErrorKind::invalid_argument, "EM-GMM input contains a non-finite value");

  const double nd = static_cast<double>(n);
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / nd;
  double var_all = 0.0;
  for (double x : sorted) var_all += (x - mean) * (x - mean);
  var_all = std::max(var_all / nd, kVarianceFloor);

  double pi = 0.5;
  double mu1 = sorted_quantile(sorted, 0.25);
  double mu2 = sorted_quantile(sorted, 0.75);
  double var1 = var_all;
  double var2 = var_all;

  GmmFit fit;
  std::vector<double> resp(n);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const double s1 = std::sqrt(var1);
    const double s2 = std::sqrt(var2);
    const double log_pi1 = std::log(pi);
    const double log_pi2 = std::log1p(-pi);
    double loglik = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = sorted[i];
      const double a = log_pi1 + normal_log_pdf(x, mu1, s1);
      const double b = log_pi2 + normal_log_pdf(x, mu2, s2);
      const double m = std::max(a, b);
      const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
      resp[i] = std::exp(a - lse);
      loglik += lse;
    }
    const bool converged = !fit.loglik_trace.empty() && loglik - fit.loglik_trace.back() < tol;
    fit.loglik_trace.push_back(loglik);
    if (converged) break;

    double n1 = 0.0, sx1 = 0.0, sx2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n1 += resp[i];
      sx1 += resp[i] * sorted[i];
      sx2 += (1.0 - resp[i]) * sorted[i];
    }
    const double n2 = nd - n1;
    // A component that lost all its mass keeps its previous parameters.
    if (n1 <= 0.0 || n2 <= 0.0) break;
    mu1 = sx1 / n1;
    mu2 = sx2 / n2;
    double v1 = 0.0, v2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v1 += resp[i] * (sorted[i] - mu1) * (sorted[i] - mu1);
      v2 += (1.0 - resp[i]) * (sorted[i] - mu2) * (sorted[i] - mu2);
    }
    var1 = std::max(v1 / n1, kVarianceFloor);
    var2 = std::max(v2 / n2, kVarianceFloor);
    pi = n1 / nd;
  }

  if (mu1 > mu2) {
    std::swap(mu1, mu2);
    std::swap(var1, var2);
    pi = 1.0 - pi;
  }
  fit.pi = pi;
  fit.mu_q = mu1;
  fit.sigma_q = std::sqrt(var1);
  fit.mu_uq = mu2;
  fit.sigma_uq = std::sqrt(var2);
  fit.threshold = decision_threshold(fit);
  return fit;
}

struct KMeans2Fit {
  double center_lo = 0.0;
  double center_hi = 0.0;
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k = 2 on scalars, centers seeded at min and max.
/// Ties go to the lower center.
inline KMeans2Fit fit_kmeans2(std::span<const double> input, std::size_t max_iter = 1000) {
  if (input.empty()) throw Error(ErrorKind::invalid_argument, "2-means needs a non-empty input");
  std::vector<double> xs(input.begin(), input.end());
  std::sort(xs.begin(), xs.end());
  KMeans2Fit fit{xs.front(), xs.back(), 0};
  std::vector<char> assign(xs.size(), 2);
  for (; fit.iterations < max_iter; ++fit.iterations) {
    bool changed = false;
    double s_lo = 0.0, s_hi = 0.0;
    std::size_t c_lo = 0, c_hi = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const char a = std::abs(xs[i] - fit.center_lo) <= std::abs(xs[i] - fit.center_hi) ? 0 : 1;
      changed = changed || a != assign[i];
      assign[i] = a;
      if (a == 0) {
        s_lo += xs[i];
        ++c_lo;
      } else {
        s_hi += xs[i];
        ++c_hi;
      }
    }
    if (!changed) break;
    if (c_lo > 0) fit.center_lo = s_lo / static_cast<double>(c_lo);
    if (c_hi > 0) fit.center_hi = s_hi / static_cast<double>(c_hi);
  }
  return fit;
}

enum class StrategyKind { gmm, percentile, kmeans2 };

struct Strategy {
  StrategyKind kind = StrategyKind::gmm;
  double p = 1.0;  // percentile only: retained fraction in (0, 1]
  std::size_t max_iter = 500;
  double tol = 1e-8;

  static Strategy gmm(std::size_t max_iter = 500, double tol = 1e-8) {
    return {StrategyKind::gmm, 1.0, max_iter, tol};
  }
  static Strategy percentile(double p) { return {StrategyKind::percentile, p, 0, 0.0}; }
  static Strategy kmeans2() { return {StrategyKind::kmeans2, 1.0, 1000, 0.0}; }

  std::string name() const {
    switch (kind) {
      case StrategyKind::gmm: return "gmm";
      case StrategyKind::percentile: return "percentile";
      case StrategyKind::kmeans2: return "kmeans2";
    }
    return "unknown";
  }
};

inline Strategy parse_strategy(const std::string& name, double p = 1.0) {
  if (name == "gmm") return Strategy::gmm();
  if (name == "kmeans2" || name == "kmeans") return Strategy::kmeans2();
  if (name == "percentile") return Strategy::percentile(p);
  throw Error(ErrorKind::invalid_argument, "unknown partition strategy: " + name);
}

struct ScoredItem {
  std::string id;
  double loss = 0.0;
};

struct PartitionReport {
  Strategy strategy;
  std::optional<GmmFit> gmm;
  std::optional<KMeans2Fit> kmeans;
  double threshold = 0.0;  // largest retained loss boundary
  std::size_t total = 0;
  std::size_t retained = 0;
  std::size_t discarded = 0;

  double retained_fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(retained) / static_cast<double>(total);
  }
};

struct PartitionResult {
  std::vector<std::string> retained;   // input order
  std::vector<std::string> discarded;  // input order
  PartitionReport report;
};

/// Splits scored items into retained and discarded ids.
///  gmm        - keep loss <= EM-GMM decision threshold
///  percentile - keep the floor(p * n) lowest losses, ties at the boundary by id
///  kmeans2    - keep the cluster of the lower center
inline PartitionResult partition(std::span<const ScoredItem> items, const Strategy& strategy) {
  if (items.empty()) throw Error(ErrorKind::invalid_argument, "partition needs a non-empty input");
  std::vector<double> losses;
  losses.reserve(items.size());
  for (const auto& it : items) losses.push_back(it.loss);

  PartitionResult out;
  out.report.strategy = strategy;
  out.report.total = items.size();
  std::vector<char> keep(items.size(), 0);

  switch (strategy.kind) {
    case StrategyKind::gmm: {
      GmmFit fit = fit_em_gmm(losses, strategy.max_iter, strategy.tol);
      out.report.threshold = fit.threshold;
      for (std::size_t i = 0; i < items.size(); ++i) keep[i] = losses[i] <= fit.threshold;
      out.report.gmm = std::move(fit);
      break;
    }
    case StrategyKind::percentile: {
      if (!(strategy.p > 0.0 && strategy.p <= 1.0))
        throw Error(ErrorKind::invalid_argument, "percentile p must be in (0, 1]");
      std::vector<std::size_t> order(items.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (items[a].loss != items[b].loss) return items[a].loss < items[b].loss;
        return items[a].id < items[b].id;
      });
      const auto k = static_cast<std::size_t>(std::floor(strategy.p * static_cast<double>(items.size()) + 1e-9));
      for (std::size_t j = 0; j < k; ++j) keep[order[j]] = 1;
      out.report.threshold = k > 0 ? items[order[k - 1]].loss : -std::numeric_limits<double>::infinity();
      break;
    }
    case StrategyKind::kmeans2: {
      KMeans2Fit fit = fit_kmeans2(losses, strategy.max_iter);
      for (std::size_t i = 0; i < items.size(); ++i)
        keep[i] = std::abs(losses[i] - fit.center_lo) <= std::abs(losses[i] - fit.center_hi);
      out.report.threshold = 0.5 * (fit.center_lo + fit.center_hi);
      out.report.kmeans = fit;
      break;
    }
  }

  for (std::size_t i = 0; i < items.size(); ++i)
    (keep[i] ? out.retained : out.discarded).push_back(items[i].id);
  out.report.retained = out.retained.size();
  out.report.discarded = out.discarded.size();
  return out;
}

inline nlohmann::json report_to_json(const PartitionReport& r) {
  nlohmann::json j;
  j["strategy"] = r.strategy.name();
  nlohmann::json params = nlohmann::json::object();
  if (r.strategy.kind == StrategyKind::percentile) params["p"] = r.strategy.p;
  if (r.gmm) {
    params["pi"] = r.gmm->pi;
    params["mu_q"] = r.gmm->mu_q;
    params["sigma_q"] = r.gmm->sigma_q;
    params["mu_uq"] = r.gmm->mu_uq;
    params["sigma_uq"] = r.gmm->sigma_uq;
    params["em_iterations"] = r.gmm->loglik_trace.size();
    params["final_loglik"] = r.gmm->loglik_trace.empty() ? 0.0 : r.gmm->loglik_trace.back();
  }
  if (r.kmeans) {
    params["center_lo"] = r.kmeans->center_lo;
    params["center_hi"] = r.kmeans->center_hi;
  }
  j["parameters"] = params;
  if (std::isfinite(r.threshold)) j["threshold"] = r.threshold;
  else j["threshold"] = nullptr;
  j["counts"] = {{"total", r.total}, {"retained", r.retained}, {"discarded", r.discarded}};
  j["retained_fraction"] = r.retained_fraction();
  return j;
}

}  // namespace qclean
