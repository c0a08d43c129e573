#include "seqgp/option_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "seqgp/error.hpp"
#include "seqgp/rng.hpp"

namespace seqgp {

namespace {

// Noise draws outside the no-arbitrage band are redrawn this many times.
constexpr int kNoiseRedraws = 100;

}  // namespace

OptionGridSpec OptionGridSpec::paper_default() {
  OptionGridSpec s;
  s.maturities = Eigen::VectorXd::LinSpaced(5, 0.25, 1.25);
  s.strikes = Eigen::VectorXd::LinSpaced(15, 600.0, 1300.0);
  return s;
}

std::vector<Quote> OptionGridSpec::quotes() const {
  std::vector<Quote> q;
  q.reserve(static_cast<std::size_t>(size()));
  for (Eigen::Index k = 0; k < strikes.size(); ++k) {
    for (Eigen::Index m = 0; m < maturities.size(); ++m) q.push_back({maturities[m], strikes[k]});
  }
  return q;
}

PdeGrid OptionGridSpec::pde_grid(double spot) const {
  return PdeGrid::for_quotes(spot, strikes.maxCoeff(), maturities.maxCoeff(), n_k, n_t, rate);
}

InputSet OptionGridSpec::inputs(double t) const {
  const auto n = size();
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index k = 0; k < strikes.size(); ++k) {
    for (Eigen::Index m = 0; m < maturities.size(); ++m) {
      x(k * maturities.size() + m, 0) = maturities[m];
      x(k * maturities.size() + m, 1) = strikes[k] / strike_scale;
    }
  }
  return InputSet(Eigen::VectorXd::Constant(n, t), std::move(x));
}

Eigen::VectorXd option_model_prices(const Eigen::VectorXd& f, double mu_f,
                                    const OptionQuotes& quotes, const OptionGridSpec& spec) {
  const auto surface = VolSurface::from_latent(spec.maturities, spec.strikes, f, mu_f);
  const auto grid = spec.pde_grid(quotes.spot);
  return crank_nicolson_price(surface, grid, quotes.quotes);
}

double option_loglik(const Eigen::VectorXd& f, const Eigen::VectorXd& alpha,
                     const OptionQuotes& quotes, const OptionGridSpec& spec) {
  if (alpha.size() != 2 || !(alpha[1] > 0.0)) {
    throw InvalidInput("option_loglik: alpha must be (mu_f, sigma_c > 0)");
  }
  if (f.size() != spec.size() || quotes.prices.size() != spec.size()) {
    throw InvalidInput("option_loglik: quotes inconsistent with the latent grid");
  }
  const Eigen::VectorXd model = option_model_prices(f, alpha[0], quotes, spec);
  const double sd = alpha[1];
  const auto n = static_cast<double>(f.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * sd * sd) -
         0.5 * (quotes.prices - model).squaredNorm() / (sd * sd);
}

Eigen::VectorXd option_residuals(const Eigen::VectorXd& f, const Eigen::VectorXd& alpha,
                                 const OptionQuotes& quotes, const OptionGridSpec& spec) {
  if (alpha.size() != 2 || !(alpha[1] > 0.0)) {
    throw InvalidInput("option_residuals: alpha must be (mu_f, sigma_c > 0)");
  }
  if (f.size() != spec.size() || quotes.prices.size() != spec.size()) {
    throw InvalidInput("option_residuals: quotes inconsistent with the latent grid");
  }
  return (quotes.prices - option_model_prices(f, alpha[0], quotes, spec)) / alpha[1];
}

OptionModel::OptionModel(OptionGridSpec spec, std::vector<OptionQuotes> steps,
                         Eigen::VectorXd t_values)
    : spec_(std::move(spec)), steps_(std::move(steps)) {
  if (t_values.size() != static_cast<Eigen::Index>(steps_.size())) {
    throw InvalidInput("OptionModel: one time value per step required");
  }
  for (std::size_t t = 0; t < steps_.size(); ++t) {
    if (steps_[t].prices.size() != spec_.size() ||
        steps_[t].quotes.size() != static_cast<std::size_t>(spec_.size())) {
      throw InvalidInput("OptionModel: step " + std::to_string(t + 1) +
                         " does not match the latent grid");
    }
    inputs_.push_back(spec_.inputs(t_values[static_cast<Eigen::Index>(t)]));
  }
}

double OptionModel::log_likelihood(std::size_t step, const Eigen::VectorXd& f,
                                   const Eigen::VectorXd& alpha) const {
  return option_loglik(f, alpha, steps_.at(step), spec_);
}

Eigen::VectorXd OptionModel::standardized_residuals(std::size_t step, const Eigen::VectorXd& f,
                                                    const Eigen::VectorXd& alpha) const {
  return option_residuals(f, alpha, steps_.at(step), spec_);
}

OptionDataset generate_option_dataset(const OptionConfig& cfg) {
  if (cfg.t_steps < 1 || cfg.sigma_c < 0.0 || cfg.kappa_true.size() != 4) {
    throw InvalidInput("generate_option_dataset: invalid configuration");
  }
  RngStream rng(cfg.seed);
  OptionDataset data;
  data.grid = cfg.grid;
  data.kappa_true = cfg.kappa_true;
  data.alpha_true = Eigen::Vector2d(cfg.mu_f, cfg.sigma_c);
  const auto T = static_cast<Eigen::Index>(cfg.t_steps);
  data.t_values = Eigen::VectorXd::LinSpaced(T, 0.0, cfg.dt * static_cast<double>(T - 1));
  if (T == 1) data.t_values.setZero();

  std::vector<InputSet> inputs;
  std::vector<const InputSet*> parts;
  for (Eigen::Index t = 0; t < T; ++t) inputs.push_back(cfg.grid.inputs(data.t_values[t]));
  for (const auto& in : inputs) parts.push_back(&in);
  const auto kappa = KernelParams::from_vector(cfg.kappa_true);
  const auto L = chol_decompose(gram_matrix(InputSet::concat(parts), kappa),
                                JitterSchedule{kappa.signal_var(), -1.0});
  const auto n = cfg.grid.size();
  const Eigen::VectorXd f_all = L.lower.triangularView<Eigen::Lower>() * rng.normal_vector(n * T);

  const Eigen::VectorXd spots =
      gbm_simulate(cfg.s1, cfg.gbm_mu, cfg.gbm_sigma, cfg.t_steps, cfg.dt, rng);
  for (Eigen::Index t = 0; t < T; ++t) {
    OptionQuotes q;
    q.spot = spots[t];
    q.quotes = cfg.grid.quotes();
    Eigen::VectorXd f = f_all.segment(t * n, n);
    data.surfaces.push_back(
        VolSurface::from_latent(cfg.grid.maturities, cfg.grid.strikes, f, cfg.mu_f));
    const Eigen::VectorXd model = option_model_prices(f, cfg.mu_f, q, cfg.grid);
    q.prices.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lo = std::max(q.spot - q.quotes[static_cast<std::size_t>(i)].strike, 0.0) -
                        3.0 * cfg.sigma_c;
      const double hi = q.spot + 3.0 * cfg.sigma_c;
      double c = model[i] + cfg.sigma_c * rng.normal();
      for (int r = 0; r < kNoiseRedraws && (c < lo || c > hi); ++r) {
        c = model[i] + cfg.sigma_c * rng.normal();
      }
      q.prices[i] = cfg.sigma_c > 0.0 ? std::clamp(c, lo, hi) : c;
    }
    data.f_true.push_back(std::move(f));
    data.steps.push_back(std::move(q));
  }
  return data;
}

}  // namespace seqgp
