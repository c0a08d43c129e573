#include "seqgp/samplers.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "seqgp/error.hpp"

namespace seqgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double checked(double ll) {
  if (std::isnan(ll)) throw NumericalError("log-likelihood returned NaN");
  if (ll == std::numeric_limits<double>::infinity()) {
    throw NumericalError("log-likelihood returned +infinity");
  }
  return ll;
}

}  // namespace

Eigen::VectorXd ellipse_point(const Eigen::VectorXd& current, const Eigen::VectorXd& auxiliary,
                              const Eigen::VectorXd& mean, double angle) {
  // Grouped so that angle 0 returns `current` bit for bit.
  const double c = std::cos(angle), s = std::sin(angle);
  return c * current + s * auxiliary + (1.0 - c - s) * mean;
}

EssResult ess_step(const Eigen::VectorXd& current, double current_loglik,
                   const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol,
                   const LogLikFn& loglik, RngStream& rng) {
  const auto n = current.size();
  if (mean.size() != n || chol.rows() != n || chol.cols() != n) {
    throw InvalidInput("ess_step: dimension mismatch");
  }
  if (!current.allFinite()) throw InvalidInput("ess_step: non-finite current state");
  checked(current_loglik);
  if (current_loglik == kNegInf) throw InvalidInput("ess_step: current state has zero likelihood");

  const Eigen::VectorXd aux =
      mean + chol.triangularView<Eigen::Lower>() * rng.normal_vector(n);
  const double log_y = current_loglik + std::log(rng.uniform());
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double angle = rng.uniform(0.0, two_pi);
  double lo = angle - two_pi;
  double hi = angle;

  for (int proposals = 1; proposals <= kMaxShrinks; ++proposals) {
    Eigen::VectorXd proposal = ellipse_point(current, aux, mean, angle);
    const double ll = checked(loglik(proposal));
    if (ll > log_y) return {std::move(proposal), ll, proposals};
    if (angle < 0.0) {
      lo = angle;
    } else {
      hi = angle;
    }
    angle = rng.uniform(lo, hi);
  }
  throw SamplerStall("ess_step: slice shrinkage exceeded " + std::to_string(kMaxShrinks) +
                     " proposals");
}

Eigen::VectorXd ess_step(const Eigen::VectorXd& current, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& chol, const LogLikFn& loglik, RngStream& rng) {
  return ess_step(current, loglik(current), mean, chol, loglik, rng).state;
}

KappaUpdate hyper_kappa_step(const Eigen::VectorXd& f, const GpConditional& current_prior,
                             const HyperState& kappa, const SsgSpec& q_spec,
                             const PriorFn& prior, const LogLikFn& loglik_f, RngStream& rng) {
  const Eigen::VectorXd nu = whiten(current_prior, f);

  KappaUpdate last;
  auto loglik_z = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd theta = ssg_forward(z, q_spec);
    try {
      GpConditional cond = prior(KernelParams::from_vector(theta));
      Eigen::VectorXd f_new = prior_draw(cond, nu);
      const double ll = loglik_f(f_new);
      last.f = std::move(f_new);
      last.prior = std::move(cond);
      return ll;
    } catch (const NumericalError&) {
      return kNegInf;
    }
  };

  const auto res = ess_step(kappa.z, checked(loglik_f(f)), q_spec.mean_z(), q_spec.chol_z(),
                            loglik_z, rng);
  last.kappa = HyperState::from_z(res.state, q_spec);
  last.proposals = res.proposals;
  return last;
}

HyperState hyper_alpha_step(const HyperState& alpha, const SsgSpec& q_spec,
                            const LogLikFn& loglik_alpha, RngStream& rng) {
  auto loglik_z = [&](const Eigen::VectorXd& z) {
    try {
      return loglik_alpha(ssg_forward(z, q_spec));
    } catch (const NumericalError&) {
      return kNegInf;
    }
  };
  const auto res = ess_step(alpha.z, checked(loglik_alpha(alpha.theta)), q_spec.mean_z(),
                            q_spec.chol_z(), loglik_z, rng);
  return HyperState::from_z(res.state, q_spec);
}

SurrogatePosterior surrogate_posterior(const GpConditional& prior,
                                       const Eigen::VectorXd& noise_var,
                                       const Eigen::VectorXd& g, double jitter_scale) {
  const auto n = prior.size();
  if (noise_var.size() != n || g.size() != n) {
    throw InvalidInput("surrogate_posterior: dimension mismatch");
  }
  Eigen::MatrixXd A = prior.cov;
  A.diagonal() += noise_var;
  const auto L_A = chol_decompose(A, JitterSchedule{jitter_scale, 0.0}).lower;
  const auto tri = L_A.triangularView<Eigen::Lower>();

  // Written in terms of S rather than K: accurate when S << K.
  const Eigen::MatrixXd V = tri.solve(Eigen::MatrixXd(noise_var.asDiagonal()));
  const Eigen::VectorXd r = tri.solve(g - prior.mean);
  Eigen::MatrixXd P = Eigen::MatrixXd(noise_var.asDiagonal());
  P.selfadjointView<Eigen::Lower>().rankUpdate(V.transpose(), -1.0);
  P.triangularView<Eigen::StrictlyUpper>() = P.transpose();

  SurrogatePosterior out;
  out.mean = g - V.transpose() * r;
  const double s_scale = noise_var.mean() > 0.0 ? noise_var.mean() : jitter_scale;
  out.chol = chol_decompose(P, JitterSchedule{s_scale, 0.0}).lower;
  out.log_marginal = -0.5 * r.squaredNorm() - L_A.diagonal().array().log().sum() -
                     0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  return out;
}

KappaUpdate sdss_step(const Eigen::VectorXd& f, const GpConditional& current_prior,
                      const HyperState& kappa, const SsgSpec& q_spec, const PriorFn& prior,
                      const LogLikFn& loglik_f, RngStream& rng, double aux_scale) {
  if (!(aux_scale > 0.0)) throw InvalidInput("sdss_step: aux_scale must be positive");
  if (f.size() != current_prior.size()) throw InvalidInput("sdss_step: dimension mismatch");

  const double scale0 = current_prior.cov.diagonal().mean();
  const Eigen::VectorXd s0 = aux_scale * current_prior.cov.diagonal();
  const Eigen::VectorXd g = f + (s0.array().sqrt() * rng.normal_vector(f.size()).array()).matrix();
  const auto post0 = surrogate_posterior(current_prior, s0, g, scale0);
  const Eigen::VectorXd eta = post0.chol.triangularView<Eigen::Lower>().solve(f - post0.mean);

  KappaUpdate last;
  auto loglik_z = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd theta = ssg_forward(z, q_spec);
    try {
      GpConditional cond = prior(KernelParams::from_vector(theta));
      const Eigen::VectorXd s = aux_scale * cond.cov.diagonal();
      const auto post = surrogate_posterior(cond, s, g, cond.cov.diagonal().mean());
      Eigen::VectorXd f_new = post.mean + post.chol.triangularView<Eigen::Lower>() * eta;
      const double ll = loglik_f(f_new);
      last.f = std::move(f_new);
      last.prior = std::move(cond);
      return ll == kNegInf ? ll : ll + post.log_marginal;
    } catch (const NumericalError&) {
      return kNegInf;
    }
  };

  const double current = checked(loglik_f(f)) + post0.log_marginal;
  const auto res =
      ess_step(kappa.z, current, q_spec.mean_z(), q_spec.chol_z(), loglik_z, rng);
  last.kappa = HyperState::from_z(res.state, q_spec);
  last.proposals = res.proposals;
  return last;
}

}  // namespace seqgp
