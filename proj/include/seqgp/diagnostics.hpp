#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "seqgp/engine.hpp"
#include "seqgp/likelihood.hpp"
#include "seqgp/rng.hpp"

namespace seqgp {

/// Effective sample size of a scalar chain (Geyer initial monotone sequence).
double effective_sample_size(const Eigen::VectorXd& chain);

/// Monte-Carlo standard errors of the mean and of the SD of a chain.
double mc_se_mean(const Eigen::VectorXd& chain);
double mc_se_sd(const Eigen::VectorXd& chain);

/// Column means and unbiased SDs of an M x N sample matrix.
Eigen::VectorXd column_means(const Eigen::MatrixXd& samples);
Eigen::VectorXd column_sds(const Eigen::MatrixXd& samples);

/// Fraction of `truth` entries within column mean +- 2 column SD.
double band_coverage(const Eigen::MatrixXd& samples, const Eigen::VectorXd& truth);

struct CoverageMetrics {
  std::size_t t = 0;
  std::optional<double> coverage;        // truth within +-2SD
  std::optional<std::size_t> y_outside;  // observations outside the credible interval
  std::size_t n = 0;
};

/// Latent coverage on f + mu_f and the y credible-interval exceedance count
/// for a Gaussian observation model with alpha = (mu_f, sigma_y). Each y
/// interval is built from f_i + mu_f,i + sigma_y,i * eps with fresh eps.
/// Missing truth or y leaves the corresponding metric empty.
CoverageMetrics coverage_report(const SampleSet& samples,
                                const std::optional<Eigen::VectorXd>& truth_shifted,
                                const std::optional<Eigen::VectorXd>& y, RngStream& rng);

/// Scalar functional phi_t of one sample state.
using Functional = std::function<double(const SampleState&)>;

/// Spatial mean of f.
double spatial_mean(const SampleState& s);

/// Spatial mean of f + alpha_1, the latent level including its constant mean.
/// Unlike spatial_mean it does not move along the f / mu_f trade-off.
double level_mean(const SampleState& s);

struct BiasVarianceRow {
  std::size_t t = 0;
  double var_full = 0.0;  // sigma_t^2
  double var_seq = 0.0;   // sigma_SGP,t^2
  double ratio = 0.0;     // R_t
  double bias = 0.0;      // |seq mean - full mean| of phi_t
  double se_ratio = 0.0;  // MC standard error of R_t
  double time_full_s = 0.0;
  double time_seq_s = 0.0;
  /// sigma_t^2 C t^3 N^3 / t_c - sigma_SGP,t^2 C' t tau^3 N^3 / t_c - b^2;
  /// positive favours the sequential sampler.
  double delta = 0.0;
};

struct BiasVarianceReport {
  std::vector<BiasVarianceRow> rows;
  double c_full = 0.0;  // time_full(t) ~ C t^3 N^3
  double c_seq = 0.0;   // cumulative sequential time ~ C' t tau^3 N^3
  double t_budget = 0.0;
};

struct BiasVarianceOptions {
  Functional phi = spatial_mean;
  std::size_t tau = 1;
  /// Computational budget t_c in seconds; non-positive means total full-run time.
  double t_budget = 0.0;
};

/// R_t, bias and the error-difference criterion from matched runs on the same
/// data. `seq_times` / `full_times` are per-step wall times in seconds.
BiasVarianceReport bias_variance_report(std::span<const SampleSet> seq_sets,
                                        std::span<const SampleSet> full_sets,
                                        std::span<const double> seq_times,
                                        std::span<const double> full_times,
                                        const BiasVarianceOptions& opts = {});

/// Training / test split of one step: training rows have x_1 <= 0.5.
struct HalfPlaneSplit {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

HalfPlaneSplit half_plane_split(const InputSet& inputs, double threshold = 0.5);

struct PredictTraces {
  Eigen::VectorXd sequential;    // running mean of the predictive log-likelihood
  Eigen::VectorXd history_free;
  Eigen::VectorXd ll_sequential;  // per-sample values
  Eigen::VectorXd ll_history_free;
};

/// Fits step `step` from its training half with the sequential sampler (window
/// = `history`, oldest first) and with a history-free exact chain, then scores
/// the held-out half by log N(y_star; mu_f + E[f_star | .], Cov + sigma_y^2 I)
/// for each sample i. The sequential predictive conditions on the window as
/// well as f_o unless `condition_on_window` is false (f_o only).
PredictTraces predict_experiment(std::span<const SampleSet> history, const RegressionModel& model,
                                 std::size_t step, const HalfPlaneSplit& split,
                                 const RunConfig& cfg, RngStream& rng,
                                 bool condition_on_window = true);

/// Running mean of a sequence.
Eigen::VectorXd running_mean(const Eigen::VectorXd& values);

}  // namespace seqgp
