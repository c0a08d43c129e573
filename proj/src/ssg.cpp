#include "seqgp/ssg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "seqgp/error.hpp"
#include "seqgp/gp_core.hpp"

namespace seqgp {

namespace {

constexpr double kClipFraction = 1e-12;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd factor_or_zero(const Eigen::MatrixXd& cov) {
  if (cov.isZero(0.0)) return Eigen::MatrixXd::Zero(cov.rows(), cov.cols());
  return chol_decompose(cov).lower;
}

}  // namespace

SsgSpec::SsgSpec(Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::VectorXd mean_z,
                 Eigen::MatrixXd cov_z)
    : lower_(std::move(lower)),
      upper_(std::move(upper)),
      mean_z_(std::move(mean_z)),
      cov_z_(std::move(cov_z)) {
  const auto n = lower_.size();
  if (upper_.size() != n || mean_z_.size() != n || cov_z_.rows() != n || cov_z_.cols() != n) {
    throw InvalidInput("SsgSpec: inconsistent dimensions");
  }
  if (!(lower_.array() < upper_.array()).all() || !lower_.allFinite() || !upper_.allFinite()) {
    throw InvalidInput("SsgSpec: need finite lower < upper elementwise");
  }
  if (!mean_z_.allFinite() || !cov_z_.allFinite()) {
    throw InvalidInput("SsgSpec: non-finite Gaussian parameters");
  }
  cov_z_ = 0.5 * (cov_z_ + cov_z_.transpose()).eval();
  chol_z_ = factor_or_zero(cov_z_);
}

SsgSpec SsgSpec::non_informative(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  const auto n = lower.size();
  return SsgSpec(std::move(lower), std::move(upper), Eigen::VectorXd::Zero(n),
                 kNonInformativeSd * kNonInformativeSd * Eigen::MatrixXd::Identity(n, n));
}

SsgSpec SsgSpec::with_gaussian(Eigen::VectorXd mean_z, Eigen::MatrixXd cov_z) const {
  return SsgSpec(lower_, upper_, std::move(mean_z), std::move(cov_z));
}

SsgSpec SsgSpec::conditional_block(Eigen::Index first, Eigen::Index count,
                                   const Eigen::VectorXd& z_full) const {
  const Eigen::Index n = dim();
  if (first < 0 || count <= 0 || first + count > n || z_full.size() != n) {
    throw InvalidInput("SsgSpec::conditional_block: bad block");
  }
  const Eigen::Index n_other = n - count;
  Eigen::VectorXd lo = lower_.segment(first, count);
  Eigen::VectorXd hi = upper_.segment(first, count);
  if (n_other == 0) return SsgSpec(lo, hi, mean_z_, cov_z_);

  // Index of the conditioning coordinates.
  Eigen::VectorXi other(n_other);
  for (Eigen::Index i = 0, k = 0; i < n; ++i) {
    if (i < first || i >= first + count) other[k++] = static_cast<int>(i);
  }
  Eigen::VectorXd m_b = mean_z_.segment(first, count);
  Eigen::MatrixXd K_bb = cov_z_.block(first, first, count, count);
  Eigen::MatrixXd K_bo(count, n_other);
  Eigen::MatrixXd K_oo(n_other, n_other);
  Eigen::VectorXd d_o(n_other);
  for (Eigen::Index j = 0; j < n_other; ++j) {
    d_o[j] = z_full[other[j]] - mean_z_[other[j]];
    K_bo.col(j) = cov_z_.block(first, other[j], count, 1);
    for (Eigen::Index i = 0; i < n_other; ++i) K_oo(i, j) = cov_z_(other[i], other[j]);
  }
  if (K_oo.isZero(0.0)) return SsgSpec(lo, hi, m_b, K_bb);

  const auto L = chol_decompose(K_oo).lower;
  const auto tri = L.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd W = tri.solve(K_bo.transpose());  // n_other x count
  const Eigen::VectorXd a = tri.solve(d_o);
  Eigen::MatrixXd cov = K_bb - W.transpose() * W;
  // Clamp the tiny negative eigen-directions rounding can leave behind.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
  const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  cov = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  return SsgSpec(lo, hi, m_b + W.transpose() * a, cov);
}

SsgSpec SsgSpec::stack(const SsgSpec& a, const SsgSpec& b) {
  const auto na = a.dim();
  const auto nb = b.dim();
  Eigen::VectorXd lo(na + nb), hi(na + nb), m(na + nb);
  lo << a.lower_, b.lower_;
  hi << a.upper_, b.upper_;
  m << a.mean_z_, b.mean_z_;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(na + nb, na + nb);
  K.topLeftCorner(na, na) = a.cov_z_;
  K.bottomRightCorner(nb, nb) = b.cov_z_;
  return SsgSpec(lo, hi, m, K);
}

HyperState HyperState::from_z(Eigen::VectorXd z, const SsgSpec& spec) {
  HyperState s;
  s.theta = ssg_forward(z, spec);
  s.z = std::move(z);
  return s;
}

Eigen::VectorXd ssg_forward(const Eigen::VectorXd& z, const SsgSpec& spec) {
  if (z.size() != spec.dim()) throw InvalidInput("ssg_forward: length mismatch");
  Eigen::VectorXd theta(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double lo = spec.lower()[i];
    const double hi = spec.upper()[i];
    double v = lo + (hi - lo) * sigmoid(z[i]);
    if (v >= hi) v = std::nextafter(hi, lo);
    if (v <= lo) v = std::nextafter(lo, hi);
    theta[i] = v;
  }
  return theta;
}

Eigen::VectorXd ssg_inverse(const Eigen::VectorXd& theta, const SsgSpec& spec) {
  if (theta.size() != spec.dim()) throw InvalidInput("ssg_inverse: length mismatch");
  Eigen::VectorXd z(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double lo = spec.lower()[i];
    const double hi = spec.upper()[i];
    if (!(theta[i] > lo && theta[i] < hi)) {
      throw InvalidInput("ssg_inverse: entry " + std::to_string(i) + " = " +
                         std::to_string(theta[i]) + " not strictly inside its bounds");
    }
    const double p = (theta[i] - lo) / (hi - lo);
    z[i] = std::log(p) - std::log1p(-p);
  }
  return z;
}

Eigen::VectorXd ssg_inverse_clipped(const Eigen::VectorXd& theta, const SsgSpec& spec) {
  if (theta.size() != spec.dim()) throw InvalidInput("ssg_inverse: length mismatch");
  Eigen::VectorXd clipped(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (std::isnan(theta[i])) throw InvalidInput("ssg_inverse: NaN entry");
    const double lo = spec.lower()[i];
    const double hi = spec.upper()[i];
    const double eps = kClipFraction * (hi - lo);
    clipped[i] = std::clamp(theta[i], lo + eps, hi - eps);
  }
  return ssg_inverse(clipped, spec);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> moment_match(const Eigen::MatrixXd& z_samples) {
  const Eigen::Index m = z_samples.rows();
  const Eigen::Index d = z_samples.cols();
  if (m < 2) throw InvalidInput("moment_match: need at least two samples");
  if (!z_samples.allFinite()) throw InvalidInput("moment_match: non-finite samples");

  // Summands are sorted before accumulation so the result does not depend on
  // row order, bit for bit.
  std::vector<double> terms(static_cast<std::size_t>(m));
  auto sorted_sum = [&terms]() {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double v : terms) s += v;
    return s;
  };

  Eigen::VectorXd mean(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) terms[static_cast<std::size_t>(i)] = z_samples(i, j);
    mean[j] = sorted_sum() / static_cast<double>(m);
  }
  Eigen::MatrixXd cov(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j; k < d; ++k) {
      for (Eigen::Index i = 0; i < m; ++i) {
        terms[static_cast<std::size_t>(i)] =
            (z_samples(i, j) - mean[j]) * (z_samples(i, k) - mean[k]);
      }
      cov(j, k) = cov(k, j) = sorted_sum() / static_cast<double>(m - 1);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < 1e-10) cov.diagonal().array() += kMomentJitter;
  return {mean, cov};
}

}  // namespace seqgp
