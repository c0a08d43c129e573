#include <cmath>
#include <numbers>

#include "seqgp/error.hpp"
#include "seqgp/likelihood.hpp"
#include "seqgp/rng.hpp"

namespace seqgp {

double gauss_loglik(const Eigen::VectorXd& f, const Eigen::VectorXd& alpha,
                    const Eigen::VectorXd& y) {
  if (f.size() != y.size()) throw InvalidInput("gauss_loglik: f and y lengths differ");
  if (alpha.size() != 2) throw InvalidInput("gauss_loglik: alpha must be (mu_f, sigma_y)");
  const double mu = alpha[0];
  const double sd = alpha[1];
  if (!(sd > 0.0)) throw InvalidInput("gauss_loglik: sigma_y must be positive");
  const double sq = (y.array() - f.array() - mu).square().sum();
  const auto n = static_cast<double>(y.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * sd * sd) - 0.5 * sq / (sd * sd);
}

RegressionModel::RegressionModel(std::vector<InputSet> inputs, std::vector<Eigen::VectorXd> y)
    : inputs_(std::move(inputs)), y_(std::move(y)) {
  if (inputs_.size() != y_.size()) throw InvalidInput("RegressionModel: step counts differ");
  for (std::size_t t = 0; t < y_.size(); ++t) {
    if (inputs_[t].size() != y_[t].size()) {
      throw InvalidInput("RegressionModel: inputs and observations differ at step " +
                         std::to_string(t + 1));
    }
  }
}

double RegressionModel::log_likelihood(std::size_t step, const Eigen::VectorXd& f,
                                       const Eigen::VectorXd& alpha) const {
  return gauss_loglik(f, alpha, y_.at(step));
}

Eigen::VectorXd RegressionModel::standardized_residuals(std::size_t step, const Eigen::VectorXd& f,
                                                        const Eigen::VectorXd& alpha) const {
  const Eigen::VectorXd& y = y_.at(step);
  if (f.size() != y.size() || alpha.size() != 2 || !(alpha[1] > 0.0)) {
    throw InvalidInput("standardized_residuals: invalid f or alpha");
  }
  return (y.array() - f.array() - alpha[0]) / alpha[1];
}

RegressionModel RegressionModel::with_step_subset(std::size_t step,
                                                  std::span<const Eigen::Index> index) const {
  auto inputs = inputs_;
  auto y = y_;
  inputs.at(step) = inputs_.at(step).subset(index);
  Eigen::VectorXd ys(static_cast<Eigen::Index>(index.size()));
  for (std::size_t k = 0; k < index.size(); ++k) ys[static_cast<Eigen::Index>(k)] = y_[step][index[k]];
  y[step] = std::move(ys);
  return RegressionModel(std::move(inputs), std::move(y));
}

Eigen::VectorXd unit_time_grid(std::size_t t_steps) {
  if (t_steps == 1) return Eigen::VectorXd::Zero(1);
  return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(t_steps), 0.0, 1.0);
}

RegressionDataset generate_regression_dataset(const RegressionConfig& cfg) {
  if (cfg.t_steps < 1 || cfg.n_per_step < 1) {
    throw InvalidInput("generate_regression_dataset: need t_steps, n_per_step >= 1");
  }
  if (cfg.sigma_y < 0.0) throw InvalidInput("generate_regression_dataset: sigma_y < 0");
  RngStream rng(cfg.seed);
  const auto T = static_cast<Eigen::Index>(cfg.t_steps);
  const auto N = static_cast<Eigen::Index>(cfg.n_per_step);
  const Eigen::VectorXd t_grid = unit_time_grid(cfg.t_steps);

  RegressionDataset data;
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::MatrixXd x(N, 2);
    for (Eigen::Index i = 0; i < N; ++i) {
      x(i, 0) = rng.uniform();
      x(i, 1) = rng.uniform();
    }
    data.inputs.emplace_back(Eigen::VectorXd::Constant(N, t_grid[t]), std::move(x));
  }
  std::vector<const InputSet*> parts;
  for (const auto& in : data.inputs) parts.push_back(&in);
  const InputSet all = InputSet::concat(parts);

  for (int attempt = 0;; ++attempt) {
    Eigen::VectorXd ls(3);
    if (cfg.fixed_lengthscales.size() == 3) {
      ls = cfg.fixed_lengthscales;
    } else {
      for (auto& l : ls) l = rng.uniform(0.0, cfg.max_lengthscale);
    }
    const KernelParams kappa(ls.head(2), ls[2], cfg.signal_sd);
    try {
      const auto L = chol_decompose(gram_matrix(all, kappa),
                                    JitterSchedule{kappa.signal_var(), -1.0});
      const Eigen::VectorXd f = L.lower.triangularView<Eigen::Lower>() * rng.normal_vector(N * T);
      data.kappa_true = kappa.to_vector();
      data.alpha_true = Eigen::Vector2d(cfg.mu_f, cfg.sigma_y);
      for (Eigen::Index t = 0; t < T; ++t) {
        Eigen::VectorXd ft = f.segment(t * N, N);
        Eigen::VectorXd yt = ft.array() + cfg.mu_f;
        for (Eigen::Index i = 0; i < N; ++i) yt[i] += cfg.sigma_y * rng.normal();
        data.f_true.push_back(std::move(ft));
        data.y.push_back(std::move(yt));
      }
      return data;
    } catch (const DecompositionFailure&) {
      if (attempt + 1 >= kDatasetRetries || cfg.fixed_lengthscales.size() == 3) throw;
    }
  }
}

GpConditional predictive_conditionals(std::span<const LatentBlock> window,
                                      const LatentBlock& observed, const InputSet& x_star,
                                      const KernelParams& kappa) {
  if (x_star.empty()) return {};
  std::vector<LatentBlock> all(window.begin(), window.end());
  all.push_back(observed);
  return conditional_prior(all, x_star, kappa);
}

double predictive_loglik(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                         const Eigen::VectorXd& alpha, const Eigen::VectorXd& y_star) {
  const auto n = y_star.size();
  if (mean.size() != n || cov.rows() != n || cov.cols() != n) {
    throw InvalidInput("predictive_loglik: dimension mismatch");
  }
  if (alpha.size() != 2 || !(alpha[1] > 0.0)) {
    throw InvalidInput("predictive_loglik: alpha must be (mu_f, sigma_y > 0)");
  }
  if (n == 0) return 0.0;
  Eigen::MatrixXd S = cov;
  S.diagonal().array() += alpha[1] * alpha[1];
  // S >= sigma_y^2 I, so the exact factorization is tried first.
  GpConditional g;
  auto factor = chol_decompose(S, JitterSchedule{alpha[1] * alpha[1], 0.0});
  g.mean = mean.array() + alpha[0];
  g.chol = std::move(factor.lower);
  return log_density(g, y_star);
}

}  // namespace seqgp
