#pragma once

// Gaussian-process regression with a squared-exponential kernel, exact
// marginal likelihood for pooled data with repeated inputs, and Bayes-factor
// comparison of clusterings.

#include "tscluster/error.hpp"
#include "tscluster/ingest.hpp"
#include "tscluster/parallel.hpp"
#include "tscluster/partition.hpp"
#include "tscluster/random.hpp"
#include "tscluster/rmst.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace tscluster {

struct GpHyper {
  double signal_variance = 1.0; // sigma_f^2
  double length_scale = 1.0;
  double noise_variance = 1e-2; // sigma_n^2
};

struct GpOptions {
  int restarts = 3;
  int max_iterations = 200;
  double noise_floor = 1e-8; // absolute floor on sigma_n^2, scaled by max(var(y), 1)
  std::uint64_t seed = 0;
  std::optional<GpHyper> init;
  bool optimize = true;
};

/// Gradient of the log marginal likelihood with respect to
/// (log sigma_f^2, log length_scale, log sigma_n^2).
using LmlGradient = std::array<double, 3>;

namespace detail {

// Observations pooled by identical input. With r_k replicates at input u_k the
// covariance Z K Z^T + s^2 I splits, by an orthogonal within-group transform,
// into the group means (covariance K + s^2 R^{-1}) and n - m independent
// within-group contrasts of variance s^2.
struct GroupedData {
  std::vector<double> inputs;
  std::vector<double> counts;
  Eigen::VectorXd means; // centred
  double ss_within = 0.0;
  std::size_t n = 0;
};

inline GroupedData group_observations(std::span<const double> x, std::span<const double> y, double offset) {
  std::map<double, std::vector<double>> groups;
  for (std::size_t i = 0; i < x.size(); ++i) groups[x[i]].push_back(y[i] - offset);
  GroupedData g;
  g.n = x.size();
  g.means.resize(static_cast<Eigen::Index>(groups.size()));
  Eigen::Index k = 0;
  for (const auto& [u, ys] : groups) {
    double sum = 0.0;
    for (double v : ys) sum += v;
    const double mean = sum / static_cast<double>(ys.size());
    for (double v : ys) g.ss_within += (v - mean) * (v - mean);
    g.inputs.push_back(u);
    g.counts.push_back(static_cast<double>(ys.size()));
    g.means(k++) = mean;
  }
  return g;
}

inline Eigen::MatrixXd se_kernel(std::span<const double> a, std::span<const double> b, const GpHyper& h) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  const double inv = 1.0 / (2.0 * h.length_scale * h.length_scale);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = a[i] - b[j];
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h.signal_variance * std::exp(-d * d * inv);
    }
  return k;
}

// Covariance of the group means, K + s^2 R^{-1}.
inline Eigen::MatrixXd mean_covariance(const GroupedData& g, const GpHyper& h) {
  Eigen::MatrixXd k = se_kernel(g.inputs, g.inputs, h);
  for (std::size_t i = 0; i < g.inputs.size(); ++i)
    k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += h.noise_variance / g.counts[i];
  return k;
}

// Cholesky with an escalating diagonal jitter (relative to the signal variance).
inline Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& k, double scale, double* used = nullptr) {
  static constexpr std::array<double, 8> ladder{0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};
  for (double jitter : ladder) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
      if (used) *used = jitter * scale;
      return llt;
    }
  }
  throw NumericalError("GP kernel matrix factorization failed after maximum jitter");
}

inline double grouped_lml(const GroupedData& g, const GpHyper& h, LmlGradient* grad) {
  const auto m = static_cast<Eigen::Index>(g.inputs.size());
  const double two_pi = 2.0 * std::numbers::pi;
  const Eigen::MatrixXd km = mean_covariance(g, h);
  const auto llt = robust_cholesky(km, h.signal_variance);
  const Eigen::VectorXd alpha = llt.solve(g.means);
  const Eigen::MatrixXd l = llt.matrixL();

  double lml = -0.5 * g.means.dot(alpha) - l.diagonal().array().log().sum() - 0.5 * static_cast<double>(m) * std::log(two_pi);
  for (double r : g.counts) lml -= 0.5 * std::log(r);
  const double extra = static_cast<double>(g.n) - static_cast<double>(m);
  lml += -0.5 * g.ss_within / h.noise_variance - 0.5 * extra * std::log(two_pi * h.noise_variance);

  if (grad) {
    const Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(m, m));
    const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;
    const Eigen::MatrixXd kf = se_kernel(g.inputs, g.inputs, h);
    double d_signal = 0.0, d_length = 0.0, d_noise = 0.0;
    const double inv_l2 = 1.0 / (h.length_scale * h.length_scale);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double d = g.inputs[static_cast<std::size_t>(i)] - g.inputs[static_cast<std::size_t>(j)];
        d_signal += w(i, j) * kf(i, j);
        d_length += w(i, j) * kf(i, j) * d * d * inv_l2;
      }
      d_noise += w(i, i) * h.noise_variance / g.counts[static_cast<std::size_t>(i)];
    }
    (*grad)[0] = 0.5 * d_signal;
    (*grad)[1] = 0.5 * d_length;
    (*grad)[2] = 0.5 * d_noise + 0.5 * g.ss_within / h.noise_variance - 0.5 * extra;
  }
  return lml;
}

inline double sample_mean(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v;
  return s / static_cast<double>(y.size());
}

inline double sample_variance(std::span<const double> y, double mean) {
  double s = 0.0;
  for (double v : y) s += (v - mean) * (v - mean);
  return s / static_cast<double>(y.size());
}

} // namespace detail

/// Log marginal likelihood of targets y (after subtracting `mean_offset`) under a
/// zero-mean GP with squared-exponential kernel plus i.i.d. noise. Repeated
/// inputs are handled exactly. Optionally returns the gradient with respect to the
/// log hyperparameters.
inline double gp_log_marginal_likelihood(std::span<const double> x, std::span<const double> y, const GpHyper& h,
                                         double mean_offset = 0.0, LmlGradient* grad = nullptr) {
  if (x.size() != y.size()) throw InvalidInput("GP inputs and targets differ in length");
  if (x.empty()) throw InvalidInput("GP needs at least one observation");
  if (!(h.signal_variance > 0.0) || !(h.length_scale > 0.0) || !(h.noise_variance > 0.0))
    throw InvalidInput("GP hyperparameters must be positive");
  return detail::grouped_lml(detail::group_observations(x, y, mean_offset), h, grad);
}

struct GpPrediction {
  std::vector<double> mean;
  std::vector<double> variance; // latent function variance
};

/// A fitted GP; immutable after construction.
class GpModel {
public:
  /// Fits hyperparameters by multi-start BFGS ascent on the log marginal
  /// likelihood (in log-parameter space), then conditions on the data. The prior
  /// mean is the sample mean of the targets.
  static GpModel fit(std::span<const double> x, std::span<const double> y, const GpOptions& opts = {}) {
    validate(x, y);
    GpModel model;
    model.offset_ = detail::sample_mean(y);
    model.data_ = detail::group_observations(x, y, model.offset_);
    const double var = detail::sample_variance(y, model.offset_);
    model.noise_floor_ = opts.noise_floor * std::max(var, 1.0);

    GpHyper init = opts.init.value_or(default_hyper(model.data_, var));
    init.noise_variance = std::max(init.noise_variance, 2.0 * model.noise_floor_);
    GpHyper best = init;
    if (opts.optimize) {
      double best_lml = -std::numeric_limits<double>::infinity();
      Rng rng(opts.seed);
      for (int r = 0; r < std::max(1, opts.restarts); ++r) {
        GpHyper start = init;
        if (r > 0) {
          start.length_scale *= std::exp(std::log(0.2) + uniform_unit(rng) * std::log(25.0));
          start.noise_variance = std::max(2.0 * model.noise_floor_,
                                          init.noise_variance * std::exp(std::log(0.05) + uniform_unit(rng) * std::log(40.0)));
        }
        double lml = 0.0;
        const GpHyper h = model.optimize(start, opts.max_iterations, lml);
        if (lml > best_lml) {
          best_lml = lml;
          best = h;
        }
      }
    }
    model.condition(best);
    return model;
  }

  /// Conditions on the data with fixed hyperparameters.
  static GpModel with_hyper(std::span<const double> x, std::span<const double> y, const GpHyper& h,
                            std::optional<double> mean_offset = std::nullopt) {
    validate(x, y);
    GpModel model;
    model.offset_ = mean_offset.value_or(detail::sample_mean(y));
    model.data_ = detail::group_observations(x, y, model.offset_);
    model.condition(h);
    return model;
  }

  const GpHyper& hyper() const noexcept { return hyper_; }
  double log_marginal_likelihood() const noexcept { return lml_; }
  double mean_offset() const noexcept { return offset_; }
  std::size_t observations() const noexcept { return data_.n; }
  const std::vector<double>& unique_inputs() const noexcept { return data_.inputs; }

  /// Covariance of the group means and its stored Cholesky factor.
  Eigen::MatrixXd kernel_matrix() const { return detail::mean_covariance(data_, hyper_); }
  Eigen::MatrixXd cholesky_factor() const { return chol_; }
  double jitter() const noexcept { return jitter_; }

  GpPrediction predict(std::span<const double> query) const {
    const Eigen::MatrixXd ks = detail::se_kernel(data_.inputs, query, hyper_);
    GpPrediction p;
    const Eigen::VectorXd mu = ks.transpose() * alpha_;
    const Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(ks);
    for (std::size_t i = 0; i < query.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      p.mean.push_back(offset_ + mu(ii));
      p.variance.push_back(std::max(0.0, hyper_.signal_variance - v.col(ii).squaredNorm()));
    }
    return p;
  }

private:
  static void validate(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidInput("GP inputs and targets differ in length");
    if (x.size() < 2) throw InvalidInput("GP fit needs at least 2 points");
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InvalidInput("GP data must be finite");
  }

  static GpHyper default_hyper(const detail::GroupedData& g, double var) {
    const double span = g.inputs.back() - g.inputs.front();
    GpHyper h;
    h.signal_variance = var > 0.0 ? var : 1.0;
    h.length_scale = span > 0.0 ? span / 10.0 : 1.0;
    h.noise_variance = 0.1 * h.signal_variance;
    return h;
  }

  // Parameterisation: theta = (log sf2, log ell, log(sn2 - floor)).
  GpHyper to_hyper(const Eigen::Vector3d& th) const {
    return {std::exp(th(0)), std::exp(th(1)), noise_floor_ + std::exp(th(2))};
  }

  double objective(const Eigen::Vector3d& th, Eigen::Vector3d* grad) const {
    const GpHyper h = to_hyper(th);
    LmlGradient g{};
    double v;
    try {
      v = detail::grouped_lml(data_, h, grad ? &g : nullptr);
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
    if (grad) {
      (*grad)(0) = g[0];
      (*grad)(1) = g[1];
      (*grad)(2) = g[2] * (h.noise_variance - noise_floor_) / h.noise_variance;
    }
    return v;
  }

  GpHyper optimize(const GpHyper& start, int max_iterations, double& lml_out) const {
    // Box keeps the search away from numerically meaningless regions.
    const double span = std::max(data_.inputs.back() - data_.inputs.front(), 1.0);
    Eigen::Vector3d lo(std::log(1e-12), std::log(span * 1e-3), std::log(noise_floor_ * 1e-3));
    Eigen::Vector3d hi(std::log(1e12), std::log(span * 1e2), std::log(1e12));
    const auto project = [&](Eigen::Vector3d th) { return th.cwiseMax(lo).cwiseMin(hi); };

    Eigen::Vector3d th(std::log(start.signal_variance), std::log(start.length_scale),
                       std::log(std::max(start.noise_variance - noise_floor_, noise_floor_)));
    th = project(th);
    Eigen::Vector3d g;
    double f = objective(th, &g);
    if (!std::isfinite(f)) {
      lml_out = f;
      return to_hyper(th);
    }
    Eigen::Matrix3d hinv = Eigen::Matrix3d::Identity();
    for (int it = 0; it < max_iterations; ++it) {
      if (g.lpNorm<Eigen::Infinity>() < 1e-7) break;
      Eigen::Vector3d dir = hinv * g;
      if (dir.dot(g) <= 0.0) {
        hinv.setIdentity();
        dir = g;
      }
      const double max_step = dir.lpNorm<Eigen::Infinity>();
      if (max_step > 2.0) dir *= 2.0 / max_step;
      double step = 1.0;
      Eigen::Vector3d th_new, g_new;
      double f_new = -std::numeric_limits<double>::infinity();
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls) {
        th_new = project(th + step * dir);
        f_new = objective(th_new, &g_new);
        if (std::isfinite(f_new) && f_new >= f + 1e-4 * g.dot(th_new - th)) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      const Eigen::Vector3d s = th_new - th;
      const Eigen::Vector3d y = g - g_new; // gradient of the minimised negative
      const double sy = s.dot(y);
      if (sy > 1e-12) {
        const double rho = 1.0 / sy;
        const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();
        hinv = (i3 - rho * s * y.transpose()) * hinv * (i3 - rho * y * s.transpose()) + rho * s * s.transpose();
      }
      const double improvement = f_new - f;
      th = th_new;
      f = f_new;
      g = g_new;
      if (improvement < 1e-10 * std::max(1.0, std::abs(f)) && s.lpNorm<Eigen::Infinity>() < 1e-8) break;
    }
    lml_out = f;
    return to_hyper(th);
  }

  void condition(const GpHyper& h) {
    hyper_ = h;
    const Eigen::MatrixXd km = detail::mean_covariance(data_, h);
    const auto llt = detail::robust_cholesky(km, h.signal_variance, &jitter_);
    chol_ = llt.matrixL();
    alpha_ = llt.solve(data_.means);
    lml_ = detail::grouped_lml(data_, h, nullptr);
  }

  detail::GroupedData data_;
  double offset_ = 0.0;
  double noise_floor_ = 1e-8;
  GpHyper hyper_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
  double jitter_ = 0.0;
};

enum class GpAxis { task_index, time };

struct CurveOptions {
  GpAxis axis = GpAxis::task_index;
  std::size_t max_inputs = 60; // distinct GP inputs after subsampling
  bool completed_only = true;  // ignore imputed never-completed tasks
  GpOptions gp;
};

struct ClusterCurve {
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> variance;
  double log_likelihood = 0.0;
  GpHyper hyper;
};

namespace detail {

// Pooled (input, target) points of a set of trajectories. On the task axis the
// input is the 1-based task index, subsampled with a stride so that at most
// max_inputs distinct indices remain. On the time axis the input is completion
// time binned to max_inputs bins over [0, horizon] and the target is the task index.
inline std::pair<std::vector<double>, std::vector<double>> pooled_points(
    std::span<const Trajectory* const> members, const CurveOptions& opts, double horizon) {
  std::vector<double> x, y;
  if (members.empty()) return {x, y};
  const std::size_t len = members.front()->size();
  const std::size_t cap = std::max<std::size_t>(opts.max_inputs, 2);
  const std::size_t stride = opts.axis == GpAxis::task_index ? std::max<std::size_t>(1, (len + cap - 1) / cap) : 1;
  for (const Trajectory* t : members) {
    if (t->size() != len) throw InvalidInput("cluster trajectories differ in length");
    for (std::size_t k = 0; k < len; k += stride) {
      if (opts.completed_only && !t->completed[k]) continue;
      if (opts.axis == GpAxis::task_index) {
        x.push_back(static_cast<double>(k + 1));
        y.push_back(t->values[k]);
      } else {
        const double width = horizon / static_cast<double>(cap);
        const double bin = std::min(std::floor(t->values[k] / width), static_cast<double>(cap - 1));
        x.push_back((bin + 0.5) * width);
        y.push_back(static_cast<double>(k + 1));
      }
    }
  }
  return {x, y};
}

inline double axis_horizon(std::span<const Trajectory* const> members) {
  double h = 0.0;
  for (const Trajectory* t : members)
    for (double v : t->values) h = std::max(h, v);
  return h > 0.0 ? h : 1.0;
}

} // namespace detail

/// GP fitted to the pooled points of a cluster, evaluated on the full axis grid
/// (task indices 1..M, or M evenly spaced times on [0, horizon]).
inline ClusterCurve cluster_mean_trajectory(std::span<const Trajectory* const> members, const CurveOptions& opts = {},
                                            std::optional<double> horizon = std::nullopt) {
  if (members.empty()) throw InvalidInput("cluster_mean_trajectory: empty cluster");
  const double h = horizon.value_or(detail::axis_horizon(members));
  const auto [x, y] = detail::pooled_points(members, opts, h);
  const GpModel model = GpModel::fit(x, y, opts.gp);
  ClusterCurve c;
  const std::size_t len = members.front()->size();
  for (std::size_t k = 0; k < len; ++k)
    c.grid.push_back(opts.axis == GpAxis::task_index
                         ? static_cast<double>(k + 1)
                         : h * static_cast<double>(k) / static_cast<double>(std::max<std::size_t>(len - 1, 1)));
  const auto pred = model.predict(c.grid);
  c.mean = pred.mean;
  c.variance = pred.variance;
  c.log_likelihood = model.log_marginal_likelihood();
  c.hyper = model.hyper();
  return c;
}

inline ClusterCurve cluster_mean_trajectory(const std::vector<Trajectory>& members, const CurveOptions& opts = {}) {
  std::vector<const Trajectory*> ptrs;
  for (const auto& t : members) ptrs.push_back(&t);
  return cluster_mean_trajectory(std::span<const Trajectory* const>(ptrs), opts);
}

struct BayesComparison {
  double log_likelihood_whole = 0.0;
  std::vector<double> log_likelihoods_per_cluster;
  double log_k = 0.0; // sum of cluster log-likelihoods minus whole-set log-likelihood
};

struct PairwiseBayes {
  int cluster_a = 0;
  int cluster_b = 0;
  double log_k = 0.0;
};

namespace detail {

inline double fitted_log_likelihood(std::span<const Trajectory* const> members, const CurveOptions& opts,
                                    double horizon) {
  const auto [x, y] = pooled_points(members, opts, horizon);
  if (x.size() < 2) throw NumericalError("too few observations for a GP fit");
  return GpModel::fit(x, y, opts.gp).log_marginal_likelihood();
}

inline std::vector<const Trajectory*> pointers(const std::vector<Trajectory>& trajectories) {
  std::vector<const Trajectory*> out;
  for (const auto& t : trajectories) out.push_back(&t);
  return out;
}

} // namespace detail

/// Compares one GP per cluster against a single GP for everyone (equal prior
/// odds): log K = sum_c log p(D_c | M_c) - log p(D | M_whole).
inline BayesComparison bayes_factor(const Partition& partition, const std::vector<Trajectory>& trajectories,
                                    const CurveOptions& opts = {}, unsigned threads = 1) {
  if (partition.size() != trajectories.size()) throw InvalidInput("bayes_factor: partition size mismatch");
  const auto all = detail::pointers(trajectories);
  const double horizon = detail::axis_horizon(all);
  BayesComparison out;
  out.log_likelihood_whole = detail::fitted_log_likelihood(all, opts, horizon);

  const auto members = partition.members();
  out.log_likelihoods_per_cluster.assign(members.size(), 0.0);
  parallel_for(members.size(), threads, [&](std::size_t c) {
    if (members[c].empty()) throw InvalidInput("bayes_factor: empty cluster");
    std::vector<const Trajectory*> subset;
    for (std::size_t i : members[c]) subset.push_back(&trajectories[i]);
    try {
      out.log_likelihoods_per_cluster[c] = detail::fitted_log_likelihood(subset, opts, horizon);
    } catch (const Error& e) {
      throw NumericalError("GP fit failed for cluster " + std::to_string(c) + ": " + e.what());
    }
  });
  double sum = 0.0;
  for (double v : out.log_likelihoods_per_cluster) sum += v;
  out.log_k = sum - out.log_likelihood_whole;
  return out;
}

/// Cluster pairs joined by at least one graph edge.
inline std::vector<std::pair<int, int>> neighboring_clusters(const Partition& p, const SimGraph& g) {
  std::set<std::pair<int, int>> pairs;
  for (const auto& e : g.edges) {
    int a = p[static_cast<std::size_t>(e.u)], b = p[static_cast<std::size_t>(e.v)];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    pairs.emplace(a, b);
  }
  return {pairs.begin(), pairs.end()};
}

/// log K for each listed pair of clusters: separate GPs versus one GP on their union.
inline std::vector<PairwiseBayes> pairwise_bayes_factors(const Partition& partition,
                                                         const std::vector<Trajectory>& trajectories,
                                                         const std::vector<std::pair<int, int>>& pairs,
                                                         const CurveOptions& opts = {}, unsigned threads = 1) {
  if (partition.size() != trajectories.size()) throw InvalidInput("bayes_factor: partition size mismatch");
  const auto all = detail::pointers(trajectories);
  const double horizon = detail::axis_horizon(all);
  const auto members = partition.members();
  std::vector<double> single(members.size(), 0.0);
  parallel_for(members.size(), threads, [&](std::size_t c) {
    std::vector<const Trajectory*> subset;
    for (std::size_t i : members[c]) subset.push_back(&trajectories[i]);
    single[c] = detail::fitted_log_likelihood(subset, opts, horizon);
  });
  std::vector<PairwiseBayes> out(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [a, b] = pairs[k];
    std::vector<const Trajectory*> joint;
    for (std::size_t i : members[static_cast<std::size_t>(a)]) joint.push_back(&trajectories[i]);
    for (std::size_t i : members[static_cast<std::size_t>(b)]) joint.push_back(&trajectories[i]);
    const double whole = detail::fitted_log_likelihood(joint, opts, horizon);
    out[k] = {a, b, single[static_cast<std::size_t>(a)] + single[static_cast<std::size_t>(b)] - whole};
  });
  return out;
}

} // namespace tscluster
