#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace seqgp {

/// A single (t, x) input. `t` is the real-valued time coordinate of the step.
struct InputPoint {
  double t = 0.0;
  Eigen::VectorXd x;
};

/// Column-major collection of inputs: one row of `x` per point.
struct InputSet {
  Eigen::VectorXd t;
  Eigen::MatrixXd x;

  InputSet() = default;
  InputSet(Eigen::VectorXd t_coords, Eigen::MatrixXd x_coords);
  explicit InputSet(std::span<const InputPoint> points);

  Eigen::Index size() const noexcept { return t.size(); }
  Eigen::Index dim() const noexcept { return x.cols(); }
  bool empty() const noexcept { return t.size() == 0; }
  InputPoint point(Eigen::Index i) const;

  /// Rows of `this` selected by `index`, in order.
  InputSet subset(std::span<const Eigen::Index> index) const;

  static InputSet concat(std::span<const InputSet* const> parts);
};

/// Squared-exponential kernel hyperparameters
/// kappa = (l_x1, ..., l_xD, l_t, sigma_f).
class KernelParams {
 public:
  KernelParams(Eigen::VectorXd lengthscales_x, double lengthscale_t, double signal_sd);

  /// Layout (l_x1..l_xD, l_t, sigma_f); requires at least two entries.
  static KernelParams from_vector(const Eigen::VectorXd& kappa);
  Eigen::VectorXd to_vector() const;

  Eigen::Index dim() const noexcept { return lengthscales_x_.size(); }
  const Eigen::VectorXd& lengthscales_x() const noexcept { return lengthscales_x_; }
  double lengthscale_t() const noexcept { return lengthscale_t_; }
  double signal_sd() const noexcept { return signal_sd_; }
  double signal_var() const noexcept { return signal_sd_ * signal_sd_; }

 private:
  Eigen::VectorXd lengthscales_x_;
  double lengthscale_t_;
  double signal_sd_;
};

struct LatentBlock {
  Eigen::VectorXd values;
  InputSet inputs;
};

/// Gaussian conditional prior N(mean, chol * chol^T) of a latent block.
/// `cov` is the factorized matrix, jitter included.
struct GpConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;
  double jitter_used = 0.0;

  Eigen::Index size() const noexcept { return mean.size(); }
};

struct CholeskyFactor {
  Eigen::MatrixXd lower;
  double jitter_used = 0.0;
};

/// Jitter escalation: first try `start`, then 1e-8*scale, x10 each time,
/// up to 1e-2*scale. A negative `start` skips the initial attempt.
struct JitterSchedule {
  double scale = 1.0;
  double start = 0.0;

  static constexpr double kFirst = 1e-8;
  static constexpr double kLast = 1e-2;
};

double kernel_eval(const InputPoint& p, const InputPoint& q, const KernelParams& kappa);

Eigen::MatrixXd gram_matrix(const InputSet& points, const KernelParams& kappa,
                            double jitter = 0.0);

/// [K]_{ij} = k(a_i, b_j).
Eigen::MatrixXd cross_covariance(const InputSet& a, const InputSet& b,
                                 const KernelParams& kappa);

/// Lower Cholesky factor with bounded jitter escalation. Throws
/// DecompositionFailure carrying the last jitter tried.
CholeskyFactor chol_decompose(const Eigen::MatrixXd& K, JitterSchedule schedule);
CholeskyFactor chol_decompose(const Eigen::MatrixXd& K);

/// Conditional prior of the query block given the retained window blocks.
/// An empty window gives the unconditional prior.
GpConditional conditional_prior(std::span<const LatentBlock> window,
                                const InputSet& query, const KernelParams& kappa);

/// Gaussian with explicit covariance; factorized with the GP jitter policy.
GpConditional make_gaussian(Eigen::VectorXd mean, const Eigen::MatrixXd& cov,
                            double jitter_scale);

/// values = chol * nu + mean.
Eigen::VectorXd prior_draw(const GpConditional& cond, const Eigen::VectorXd& nu);

/// nu = chol^{-1} (values - mean).
Eigen::VectorXd whiten(const GpConditional& cond, const Eigen::VectorXd& values);

/// log N(x; cond.mean, cond.cov).
double log_density(const GpConditional& cond, const Eigen::VectorXd& x);

}  // namespace seqgp
