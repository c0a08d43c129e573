#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "seqgp/gp_core.hpp"
#include "seqgp/likelihood.hpp"
#include "seqgp/rng.hpp"
#include "seqgp/ssg.hpp"

namespace seqgp {

struct SampleState {
  Eigen::VectorXd f;
  Eigen::VectorXd kappa;
  Eigen::VectorXd alpha;
  Eigen::VectorXd z;  // ssg_inverse of (kappa; alpha)
};

/// Posterior sample of one step; `t` is one-based.
struct SampleSet {
  std::size_t t = 0;
  InputSet inputs;
  std::vector<SampleState> states;

  std::size_t size() const noexcept { return states.size(); }
  /// M x N matrix of the latent draws.
  Eigen::MatrixXd f_matrix() const;
  Eigen::MatrixXd kappa_matrix() const;
  Eigen::MatrixXd alpha_matrix() const;
};

struct RunConfig {
  std::size_t t_steps = 10;
  std::size_t tau = 1;
  std::size_t m_samples = 1000;
  std::size_t n_initial = 6000;
  std::size_t burn_in = 1000;
  std::size_t thin = 5;
  int ess_reps = 5;
  std::uint64_t seed = 1;
  bool sdss_every_step = false;
  double aux_scale = 1.0;
  /// Start the initial chain at posterior_mode instead of a prior draw. Shortens burn-in under sharp likelihoods; the target is unchanged.
  bool mode_start = false;
  Eigen::VectorXd kappa_min, kappa_max;
  Eigen::VectorXd alpha_min, alpha_max;
  /// full_gibbs_baseline refuses t * N above this.
  std::size_t full_size_guard = 2000;

  /// Throws InvalidInput naming the offending field.
  void validate() const;

  /// Non-informative SSG prior over (kappa; alpha).
  SsgSpec hyper_prior() const;
  Eigen::Index kappa_dim() const noexcept { return kappa_max.size(); }
  Eigen::Index alpha_dim() const noexcept { return alpha_max.size(); }
};

struct StepDiagnostics {
  std::size_t t = 0;
  double wall_time_s = 0.0;
  Eigen::VectorXd posterior_sd;
  long long proposals = 0;  // ESS likelihood evaluations, all updates
};

struct SequenceResult {
  std::vector<SampleSet> sets;
  std::vector<StepDiagnostics> diagnostics;
};

/// Exact-posterior chain for one step (no window): Update 1 x ess_reps, SDSS for
/// (kappa, f), ESS for alpha; burn-in then thinning to exactly m_samples.
SampleSet initial_sample(const LikelihoodModel& model, std::size_t step, const RunConfig& cfg,
                         RngStream& rng, StepDiagnostics* diag = nullptr);

/// One step of sequential sampling against the windowed approximate target.
/// `window` holds the last tau sample sets, oldest first; its last entry is
/// the previous step and supplies the hyperparameter refit.
SampleSet sequential_step(std::span<const SampleSet> window, const LikelihoodModel& model,
                          std::size_t step, const RunConfig& cfg, RngStream& rng,
                          StepDiagnostics* diag = nullptr);

/// initial_sample at step 0 then sequential_step for every later step.
SequenceResult run_sequence(const LikelihoodModel& model, const RunConfig& cfg, RngStream& rng);

/// Exact joint posterior over f_{1:t} for each t (no window, no factorization);
/// returns the marginal sample of the last block per t.
SequenceResult full_gibbs_baseline(const LikelihoodModel& model, const RunConfig& cfg,
                                   RngStream& rng, bool override_guard = false);

struct ModeStart {
  Eigen::VectorXd f;
  HyperState kappa;
};

/// Joint posterior mode of (nu, z_kappa) for one step without history, at
/// fixed alpha: Levenberg-Marquardt on the stacked residuals
/// [r(m_kappa + L_kappa nu); nu; L_z^-1 (z_kappa - m_z)] with a finite-difference
/// Jacobian. Returns the start unchanged when the model provides no
/// standardized residuals or the fit does not improve the objective.
ModeStart posterior_mode(const LikelihoodModel& model, std::size_t step,
                         const SsgSpec& kappa_prior, const ModeStart& start,
                         const Eigen::VectorXd& alpha, int max_jacobians = 100);

/// Wraps a model call so numerical failures score -infinity.
double safe_loglik(const LikelihoodModel& model, std::size_t step, const Eigen::VectorXd& f,
                   const Eigen::VectorXd& alpha);

}  // namespace seqgp
