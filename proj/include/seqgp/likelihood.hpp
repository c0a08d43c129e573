#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "seqgp/gp_core.hpp"

namespace seqgp {

/// Data model over a sequence of steps. Step indices are zero-based.
class LikelihoodModel {
 public:
  virtual ~LikelihoodModel() = default;

  virtual std::size_t num_steps() const = 0;
  virtual const InputSet& inputs(std::size_t step) const = 0;
  /// log p(y_step | f, alpha). Finite or -infinity.
  virtual double log_likelihood(std::size_t step, const Eigen::VectorXd& f,
                                const Eigen::VectorXd& alpha) const = 0;
  virtual Eigen::Index alpha_dim() const = 0;
  /// Standardized residuals r with log_likelihood = -|r|^2 / 2 + c(alpha), for
  /// independent Gaussian noise. Empty when the model has no such form.
  virtual Eigen::VectorXd standardized_residuals(std::size_t /*step*/,
                                                 const Eigen::VectorXd& /*f*/,
                                                 const Eigen::VectorXd& /*alpha*/) const {
    return {};
  }
};

/// sum_i log N(y_i; f_i + mu_f, sigma_y^2), alpha = (mu_f, sigma_y).
double gauss_loglik(const Eigen::VectorXd& f, const Eigen::VectorXd& alpha,
                    const Eigen::VectorXd& y);

/// Gaussian regression y_t = f_t + mu_f + N(0, sigma_y^2).
class RegressionModel final : public LikelihoodModel {
 public:
  RegressionModel(std::vector<InputSet> inputs, std::vector<Eigen::VectorXd> y);

  std::size_t num_steps() const override { return inputs_.size(); }
  const InputSet& inputs(std::size_t step) const override { return inputs_.at(step); }
  double log_likelihood(std::size_t step, const Eigen::VectorXd& f,
                        const Eigen::VectorXd& alpha) const override;
  Eigen::Index alpha_dim() const override { return 2; }
  Eigen::VectorXd standardized_residuals(std::size_t step, const Eigen::VectorXd& f,
                                         const Eigen::VectorXd& alpha) const override;

  const Eigen::VectorXd& observations(std::size_t step) const { return y_.at(step); }

  /// Copy with step `step` restricted to the rows in `index`.
  RegressionModel with_step_subset(std::size_t step, std::span<const Eigen::Index> index) const;

 private:
  std::vector<InputSet> inputs_;
  std::vector<Eigen::VectorXd> y_;
};

struct RegressionConfig {
  std::size_t t_steps = 20;
  std::size_t n_per_step = 200;
  std::uint64_t seed = 1;
  double mu_f = 0.5;
  double sigma_y = 0.3;
  double signal_sd = 1.0;
  double max_lengthscale = 3.1622776601683795;  // sqrt(10)
  /// When non-empty, used instead of random lengthscales (l_x1, l_x2, l_t).
  Eigen::VectorXd fixed_lengthscales;
};

struct RegressionDataset {
  std::vector<InputSet> inputs;
  std::vector<Eigen::VectorXd> f_true;
  std::vector<Eigen::VectorXd> y;
  Eigen::VectorXd kappa_true;  // (l_x1, l_x2, l_t, sigma_f)
  Eigen::VectorXd alpha_true;  // (mu_f, sigma_y)

  RegressionModel model() const { return RegressionModel(inputs, y); }
};

inline constexpr int kDatasetRetries = 5;

/// Inputs uniform on the unit square, t equally spaced on [0, 1], f drawn
/// jointly from the GP prior. Retries with fresh lengthscales when the joint
/// Gram cannot be factorized.
RegressionDataset generate_regression_dataset(const RegressionConfig& cfg);

/// Real-valued time coordinate of each step: equally spaced on [0, 1].
Eigen::VectorXd unit_time_grid(std::size_t t_steps);

/// f_star | (window, f_o) for inputs x_star at the observed step.
GpConditional predictive_conditionals(std::span<const LatentBlock> window,
                                      const LatentBlock& observed, const InputSet& x_star,
                                      const KernelParams& kappa);

/// log N(y_star; mean + mu_f, cov + sigma_y^2 I).
double predictive_loglik(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                         const Eigen::VectorXd& alpha, const Eigen::VectorXd& y_star);

}  // namespace seqgp
