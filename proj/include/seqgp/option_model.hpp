#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "seqgp/likelihood.hpp"
#include "seqgp/pde_pricer.hpp"

namespace seqgp {

/// Quotes of one step on the maturity x strike latent grid, strike-major.
struct OptionQuotes {
  double spot = 0.0;
  std::vector<Quote> quotes;
  Eigen::VectorXd prices;
};

/// Latent grid, pricing grid and the GP input layout of the option model.
struct OptionGridSpec {
  Eigen::VectorXd maturities;  // years
  Eigen::VectorXd strikes;
  double strike_scale = 1000.0;  // GP input uses strike / strike_scale
  int n_k = 200;
  int n_t = 200;
  double rate = 0.0;

  static OptionGridSpec paper_default();

  Eigen::Index size() const noexcept { return maturities.size() * strikes.size(); }
  std::vector<Quote> quotes() const;
  PdeGrid pde_grid(double spot) const;
  /// GP inputs x = (maturity, strike / strike_scale) at time coordinate t.
  InputSet inputs(double t) const;
};

/// sum_i log N(c_i; C_i(softplus(f + mu_f)), sigma_c^2), alpha = (mu_f, sigma_c).
/// Pricer failures propagate as exceptions.
double option_loglik(const Eigen::VectorXd& f, const Eigen::VectorXd& alpha,
                     const OptionQuotes& quotes, const OptionGridSpec& spec);

/// (c_i - C_i(softplus(f + mu_f))) / sigma_c.
Eigen::VectorXd option_residuals(const Eigen::VectorXd& f, const Eigen::VectorXd& alpha,
                                 const OptionQuotes& quotes, const OptionGridSpec& spec);

/// Model prices for a latent vector.
Eigen::VectorXd option_model_prices(const Eigen::VectorXd& f, double mu_f,
                                    const OptionQuotes& quotes, const OptionGridSpec& spec);

class OptionModel final : public LikelihoodModel {
 public:
  OptionModel(OptionGridSpec spec, std::vector<OptionQuotes> steps, Eigen::VectorXd t_values);

  std::size_t num_steps() const override { return steps_.size(); }
  const InputSet& inputs(std::size_t step) const override { return inputs_.at(step); }
  double log_likelihood(std::size_t step, const Eigen::VectorXd& f,
                        const Eigen::VectorXd& alpha) const override;
  Eigen::Index alpha_dim() const override { return 2; }
  Eigen::VectorXd standardized_residuals(std::size_t step, const Eigen::VectorXd& f,
                                         const Eigen::VectorXd& alpha) const override;

  const OptionGridSpec& spec() const noexcept { return spec_; }
  const OptionQuotes& step(std::size_t t) const { return steps_.at(t); }

 private:
  OptionGridSpec spec_;
  std::vector<OptionQuotes> steps_;
  std::vector<InputSet> inputs_;
};

struct OptionConfig {
  std::size_t t_steps = 12;
  std::uint64_t seed = 1;
  OptionGridSpec grid = OptionGridSpec::paper_default();
  Eigen::VectorXd kappa_true = (Eigen::VectorXd(4) << 0.5, 0.3, 0.5, 0.75).finished();
  double mu_f = -1.5;
  double sigma_c = 0.05;
  double s1 = 1000.0;
  double gbm_mu = 0.04;
  double gbm_sigma = 0.2;
  double dt = 1.0 / 12.0;  // years between steps; also the GP time spacing
};

struct OptionDataset {
  OptionGridSpec grid;
  std::vector<OptionQuotes> steps;
  Eigen::VectorXd t_values;
  std::vector<Eigen::VectorXd> f_true;
  std::vector<VolSurface> surfaces;
  Eigen::VectorXd kappa_true;
  Eigen::VectorXd alpha_true;

  OptionModel model() const { return OptionModel(grid, steps, t_values); }
};

OptionDataset generate_option_dataset(const OptionConfig& cfg);

}  // namespace seqgp
