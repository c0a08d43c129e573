#pragma once

#include <functional>

#include <Eigen/Core>

#include "seqgp/gp_core.hpp"
#include "seqgp/rng.hpp"
#include "seqgp/ssg.hpp"

namespace seqgp {

/// Log-likelihood of a state vector. Must be deterministic; may return
/// -infinity, never NaN or +infinity.
using LogLikFn = std::function<double(const Eigen::VectorXd&)>;

/// Conditional prior of the latent block as a function of the kernel
/// hyperparameters (window and inputs are captured by the callee).
using PriorFn = std::function<GpConditional(const KernelParams&)>;

inline constexpr int kMaxShrinks = 1000;

struct EssResult {
  Eigen::VectorXd state;
  double loglik = 0.0;
  int proposals = 0;
};

/// Point at `angle` on the ellipse through `current` and `auxiliary`
/// centred at `mean`.
Eigen::VectorXd ellipse_point(const Eigen::VectorXd& current, const Eigen::VectorXd& auxiliary,
                              const Eigen::VectorXd& mean, double angle);

/// One elliptical slice sampling transition for exp(loglik) N(mean, chol chol^T).
/// `current_loglik` must equal loglik(current) and be finite.
EssResult ess_step(const Eigen::VectorXd& current, double current_loglik,
                   const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol,
                   const LogLikFn& loglik, RngStream& rng);

Eigen::VectorXd ess_step(const Eigen::VectorXd& current, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& chol, const LogLikFn& loglik, RngStream& rng);

struct KappaUpdate {
  HyperState kappa;
  Eigen::VectorXd f;
  GpConditional prior;  // conditional prior at the returned kappa
  int proposals = 0;
};

/// Fixed-nu update of the kernel hyperparameters: nu = L^{-1}(f - m) at the
/// current kappa, then ESS in z-space where each proposal moves f to
/// L(kappa') nu + m(kappa'). `current_prior` must be prior(kappa).
KappaUpdate hyper_kappa_step(const Eigen::VectorXd& f, const GpConditional& current_prior,
                             const HyperState& kappa, const SsgSpec& q_spec,
                             const PriorFn& prior, const LogLikFn& loglik_f, RngStream& rng);

/// ESS in z-space for the likelihood parameters with f and kappa held fixed.
/// `loglik_alpha` maps alpha (theta-space) to the data log-likelihood.
HyperState hyper_alpha_step(const HyperState& alpha, const SsgSpec& q_spec,
                            const LogLikFn& loglik_alpha, RngStream& rng);

/// Gaussian posterior of f given surrogate data g ~ N(f, S) under the prior
/// N(prior.mean, prior.cov).
struct SurrogatePosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol;
  double log_marginal = 0.0;  // log N(g; prior.mean, prior.cov + S)
};

SurrogatePosterior surrogate_posterior(const GpConditional& prior,
                                       const Eigen::VectorXd& noise_var,
                                       const Eigen::VectorXd& g, double jitter_scale);

/// Surrogate data slice sampling transition for (kappa, f), noise
/// S = aux_scale * diag(K_kappa).
KappaUpdate sdss_step(const Eigen::VectorXd& f, const GpConditional& current_prior,
                      const HyperState& kappa, const SsgSpec& q_spec, const PriorFn& prior,
                      const LogLikFn& loglik_f, RngStream& rng, double aux_scale);

inline constexpr double kDefaultAuxScale = 1.0;

}  // namespace seqgp
