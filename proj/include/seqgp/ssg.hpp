#pragma once

#include <utility>

#include <Eigen/Core>

namespace seqgp {

/// Scaled sigmoid Gaussian: theta = lower + (upper - lower) * sigmoid(z),
/// z ~ N(mean_z, cov_z).
class SsgSpec {
 public:
  SsgSpec(Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::VectorXd mean_z,
          Eigen::MatrixXd cov_z);

  /// m_z = 0, K_z = 1.5^2 I.
  static SsgSpec non_informative(Eigen::VectorXd lower, Eigen::VectorXd upper);

  static constexpr double kNonInformativeSd = 1.5;

  Eigen::Index dim() const noexcept { return lower_.size(); }
  const Eigen::VectorXd& lower() const noexcept { return lower_; }
  const Eigen::VectorXd& upper() const noexcept { return upper_; }
  const Eigen::VectorXd& mean_z() const noexcept { return mean_z_; }
  const Eigen::MatrixXd& cov_z() const noexcept { return cov_z_; }
  /// Lower factor of cov_z; all zeros for a point mass.
  const Eigen::MatrixXd& chol_z() const noexcept { return chol_z_; }

  /// Same bounds, new Gaussian.
  SsgSpec with_gaussian(Eigen::VectorXd mean_z, Eigen::MatrixXd cov_z) const;

  /// Coordinates [first, first + count) conditioned on the remaining z entries
  /// taking the values in `z_full`.
  SsgSpec conditional_block(Eigen::Index first, Eigen::Index count,
                            const Eigen::VectorXd& z_full) const;

  /// Concatenation of independent blocks.
  static SsgSpec stack(const SsgSpec& a, const SsgSpec& b);

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  Eigen::VectorXd mean_z_;
  Eigen::MatrixXd cov_z_;
  Eigen::MatrixXd chol_z_;
};

/// A point in z-space together with its image; theta == ssg_forward(z).
struct HyperState {
  Eigen::VectorXd z;
  Eigen::VectorXd theta;

  static HyperState from_z(Eigen::VectorXd z, const SsgSpec& spec);
};

/// Strictly inside (lower, upper) even when the sigmoid saturates.
Eigen::VectorXd ssg_forward(const Eigen::VectorXd& z, const SsgSpec& spec);

/// Throws InvalidInput when any theta is on or outside its bounds.
Eigen::VectorXd ssg_inverse(const Eigen::VectorXd& theta, const SsgSpec& spec);

/// Clips theta to [lower + eps, upper - eps], eps = 1e-12 (upper - lower),
/// then inverts.
Eigen::VectorXd ssg_inverse_clipped(const Eigen::VectorXd& theta, const SsgSpec& spec);

/// Sample mean and unbiased covariance of the rows of `z_samples`.
/// Adds kMomentJitter * I when the smallest eigenvalue is below 1e-10.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> moment_match(const Eigen::MatrixXd& z_samples);

inline constexpr double kMomentJitter = 1e-8;

}  // namespace seqgp
