#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "seqgp/diagnostics.hpp"
#include "seqgp/error.hpp"
#include "seqgp/gp_core.hpp"
#include "seqgp/samplers.hpp"

using namespace seqgp;

namespace {

InputSet line_inputs(Eigen::Index n) {
  Eigen::MatrixXd x(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = 0.4 * static_cast<double>(i);
  return InputSet(Eigen::VectorXd::Zero(n), x);
}

double gauss_ll(const Eigen::VectorXd& f, const Eigen::VectorXd& y, double sd) {
  return -0.5 * (y - f).squaredNorm() / (sd * sd) -
         static_cast<double>(f.size()) * std::log(sd * std::sqrt(2.0 * std::numbers::pi));
}

/// Chain moments against reference moments with MC standard errors.
void check_moments(const Eigen::MatrixXd& chain, const Eigen::VectorXd& mean,
                   const Eigen::VectorXd& sd, double n_se) {
  for (Eigen::Index j = 0; j < chain.cols(); ++j) {
    const Eigen::VectorXd c = chain.col(j);
    const double m = c.mean();
    const double s = std::sqrt((c.array() - m).square().sum() / (c.size() - 1));
    CHECK(std::abs(m - mean[j]) < n_se * mc_se_mean(c));
    CHECK(std::abs(s - sd[j]) < n_se * mc_se_sd(c));
  }
}

}  // namespace

TEST_CASE("ellipse_point at angle zero is the current state") {
  RngStream rng(1);
  const Eigen::VectorXd cur = rng.normal_vector(5), aux = rng.normal_vector(5),
                        mean = rng.normal_vector(5);
  CHECK(ellipse_point(cur, aux, mean, 0.0) == cur);
  CHECK((ellipse_point(cur, aux, mean, std::numbers::pi / 2) - aux).norm() < 1e-14);
}

TEST_CASE("ess_step under a constant likelihood preserves the prior") {
  RngStream rng(2024);
  const auto c = conditional_prior({}, line_inputs(3), KernelParams(Eigen::VectorXd::Ones(1), 1.0, 1.4));
  GpConditional g = c;
  g.mean = Eigen::Vector3d(1.0, -0.5, 0.25);
  const LogLikFn flat = [](const Eigen::VectorXd&) { return 0.0; };
  const int n = 10000, thin = 10;
  Eigen::MatrixXd chain(n, 3);
  Eigen::VectorXd f = g.mean;
  for (int i = 0; i < n * thin; ++i) {
    f = ess_step(f, g.mean, g.chol, flat, rng);
    if (i % thin == thin - 1) chain.row(i / thin) = f.transpose();
  }
  check_moments(chain, g.mean, g.cov.diagonal().cwiseSqrt(), 4.0);
  for (int j = 0; j < 3; ++j) {
    const double mu = g.mean[j], sd = std::sqrt(g.cov(j, j));
    std::vector<double> xs(chain.col(j).data(), chain.col(j).data() + n);
    CHECK(oracle::ks_pvalue(xs, [&](double x) { return oracle::normal_cdf((x - mu) / sd); }) > 1e-3);
  }
}

TEST_CASE("ess_step targets the conjugate Gaussian posterior") {
  RngStream rng(77);
  const auto prior = conditional_prior({}, line_inputs(3), KernelParams(Eigen::VectorXd::Ones(1), 1.0, 1.0));
  const Eigen::Vector3d y(0.8, -0.3, 1.1);
  const double sd = 0.5;
  const LogLikFn ll = [&](const Eigen::VectorXd& f) { return gauss_ll(f, y, sd); };
  const auto ref = oracle::conjugate_posterior(prior.cov, prior.mean, y, 0.0, sd * sd);
  const int n = 20000;
  Eigen::MatrixXd chain(n, 3);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(3);
  double cur = ll(f);
  for (int i = 0; i < 1000 + n; ++i) {
    auto r = ess_step(f, cur, prior.mean, prior.chol, ll, rng);
    f = r.state;
    cur = r.loglik;
    CHECK(cur == ll(f));
    if (i >= 1000) chain.row(i - 1000) = f.transpose();
  }
  check_moments(chain, ref.mean, ref.cov.diagonal().cwiseSqrt(), 4.0);
}

TEST_CASE("ess_step error handling") {
  RngStream rng(3);
  const Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd L = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd x = Eigen::Vector2d(0.3, 0.1);
  const LogLikFn nan_ll = [](const Eigen::VectorXd&) { return std::nan(""); };
  CHECK_THROWS_AS(ess_step(x, 0.0, m, L, nan_ll, rng), NumericalError);
  const LogLikFn pos_inf = [](const Eigen::VectorXd&) { return std::numeric_limits<double>::infinity(); };
  CHECK_THROWS_AS(ess_step(x, 0.0, m, L, pos_inf, rng), NumericalError);

  // No proposal is ever acceptable: the bracket collapses without success.
  const LogLikFn spike = [](const Eigen::VectorXd&) {
    return -std::numeric_limits<double>::infinity();
  };
  CHECK_THROWS_AS(ess_step(x, 0.0, m, L, spike, rng), SamplerStall);
  CHECK_THROWS_AS(ess_step(x, -std::numeric_limits<double>::infinity(), m, L, spike, rng),
                  InvalidInput);
  CHECK_THROWS_AS(ess_step(x, 0.0, Eigen::VectorXd::Zero(3), L, spike, rng), InvalidInput);
}

namespace {

// Two-point latent block at t = 0 and t = 0.5 with kappa = (l_t, sigma_f).
struct TwoPoint {
  InputSet inputs{Eigen::Vector2d(0.0, 0.5), Eigen::MatrixXd::Zero(2, 0)};
  Eigen::Vector2d y{0.9, -0.4};
  double noise_sd = 0.3;

  GpConditional prior(const KernelParams& k) const { return conditional_prior({}, inputs, k); }
  double loglik(const Eigen::VectorXd& f) const { return gauss_ll(f, y, noise_sd); }
};

}  // namespace

TEST_CASE("hyper_kappa_step with a point-mass prior leaves kappa and f unchanged") {
  RngStream rng(5);
  const TwoPoint tp;
  const SsgSpec q(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(2.0, 2.0), Eigen::Vector2d(0.2, -0.3),
                  Eigen::MatrixXd::Zero(2, 2));
  const auto kappa = HyperState::from_z(q.mean_z(), q);
  const PriorFn prior = [&](const KernelParams& k) { return tp.prior(k); };
  const LogLikFn ll = [&](const Eigen::VectorXd& f) { return tp.loglik(f); };
  const auto cond = prior(KernelParams::from_vector(kappa.theta));
  const Eigen::VectorXd f = prior_draw(cond, rng.normal_vector(2));
  for (int rep = 0; rep < 10; ++rep) {
    const auto upd = hyper_kappa_step(f, cond, kappa, q, prior, ll, rng);
    CHECK(upd.kappa.theta == kappa.theta);
    CHECK((upd.f - f).norm() < 1e-12);
  }
}

TEST_CASE("hyper_kappa_step keeps nu fixed and kappa in bounds") {
  RngStream rng(8);
  const TwoPoint tp;
  const auto q = SsgSpec::non_informative(Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(2.0, 3.0));
  const PriorFn prior = [&](const KernelParams& k) { return tp.prior(k); };
  const LogLikFn ll = [&](const Eigen::VectorXd& f) { return tp.loglik(f); };
  auto kappa = HyperState::from_z(Eigen::Vector2d(0.3, -0.2), q);
  auto cond = prior(KernelParams::from_vector(kappa.theta));
  Eigen::VectorXd f = prior_draw(cond, rng.normal_vector(2));
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::VectorXd nu = whiten(cond, f);
    auto upd = hyper_kappa_step(f, cond, kappa, q, prior, ll, rng);
    CHECK((upd.kappa.theta.array() > q.lower().array()).all());
    CHECK((upd.kappa.theta.array() < q.upper().array()).all());
    const auto fresh = prior(KernelParams::from_vector(upd.kappa.theta));
    const Eigen::VectorXd f_expected = prior_draw(fresh, nu);
    CHECK((upd.f - f_expected).norm() <= 1e-8 * std::max(1.0, f_expected.norm()));
    kappa = upd.kappa;
    f = upd.f;
    cond = upd.prior;
  }
}

namespace {

/// Marginal posterior of sigma_f (l_t pinned by a narrow box) integrating f
/// out analytically, on the z scale of the ssg prior.
oracle::Moments sigma_f_quadrature(const TwoPoint& tp, const SsgSpec& q, double l_t) {
  const auto K1 = oracle::gram(tp.inputs.t, tp.inputs.x, Eigen::VectorXd(), l_t, 1.0);
  const double lo = q.lower()[1], hi = q.upper()[1], sz = std::sqrt(q.cov_z()(1, 1));
  auto log_target = [&](double z) {
    const double s = lo + (hi - lo) * oracle::sigmoid(z);
    const Eigen::MatrixXd C = s * s * K1 + tp.noise_sd * tp.noise_sd * Eigen::MatrixXd::Identity(2, 2);
    return -0.5 * z * z / (sz * sz) + oracle::mvn_logpdf(tp.y, Eigen::VectorXd::Zero(2), C);
  };
  // Moments of sigma_f itself: E[s] and SD[s] via weights on z.
  const int n = 40000;
  const double a = -12 * sz, b = 12 * sz, h = (b - a) / n;
  double mx = -1e300;
  std::vector<double> lp(n);
  for (int i = 0; i < n; ++i) mx = std::max(mx, lp[i] = log_target(a + (i + 0.5) * h));
  double z0 = 0, m1 = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double s = lo + (hi - lo) * oracle::sigmoid(a + (i + 0.5) * h);
    const double w = std::exp(lp[i] - mx);
    z0 += w;
    m1 += w * s;
    m2 += w * s * s;
  }
  return {m1 / z0, std::sqrt(m2 / z0 - (m1 / z0) * (m1 / z0))};
}

}  // namespace

TEST_CASE("kappa chain matches grid quadrature of the marginal posterior") {
  RngStream rng(99);
  const TwoPoint tp;
  const double l_t = 0.7;
  const auto q = SsgSpec::non_informative(Eigen::Vector2d(l_t - 1e-9, 0.05),
                                          Eigen::Vector2d(l_t + 1e-9, 3.0));
  const PriorFn prior = [&](const KernelParams& k) { return tp.prior(k); };
  const LogLikFn ll = [&](const Eigen::VectorXd& f) { return tp.loglik(f); };
  const auto ref = sigma_f_quadrature(tp, q, l_t);

  for (const bool surrogate : {false, true}) {
    auto kappa = HyperState::from_z(Eigen::Vector2d(0.0, 0.0), q);
    auto cond = prior(KernelParams::from_vector(kappa.theta));
    Eigen::VectorXd f = Eigen::VectorXd::Zero(2);
    double cur = ll(f);
    const int n = 40000, burn = 1000;
    Eigen::MatrixXd chain(n, 1);
    for (int i = 0; i < burn + n; ++i) {
      auto r = ess_step(f, cur, cond.mean, cond.chol, ll, rng);
      f = r.state;
      auto upd = surrogate ? sdss_step(f, cond, kappa, q, prior, ll, rng, 1.0)
                           : hyper_kappa_step(f, cond, kappa, q, prior, ll, rng);
      kappa = upd.kappa;
      f = upd.f;
      cond = upd.prior;
      cur = ll(f);
      if (i >= burn) chain(i - burn, 0) = kappa.theta[1];
    }
    check_moments(chain, Eigen::VectorXd::Constant(1, ref.mean), Eigen::VectorXd::Constant(1, ref.sd), 3.0);
  }
}

TEST_CASE("hyper_alpha_step examples") {
  RngStream rng(10);
  const Eigen::Vector3d f(0.1, -0.2, 0.4), y(0.5, -0.9, 0.2);
  const LogLikFn ll = [&](const Eigen::VectorXd& a) { return gauss_ll(f, y, a[0]); };

  const SsgSpec pm(Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 2.0),
                   Eigen::VectorXd::Constant(1, 0.3), Eigen::MatrixXd::Zero(1, 1));
  const auto fixed = HyperState::from_z(pm.mean_z(), pm);
  CHECK(hyper_alpha_step(fixed, pm, ll, rng).theta == fixed.theta);

  const auto q = SsgSpec::non_informative(Eigen::VectorXd::Constant(1, 0.0),
                                          Eigen::VectorXd::Constant(1, 2.0));
  auto alpha = HyperState::from_z(Eigen::VectorXd::Zero(1), q);
  const int n = 40000;
  Eigen::MatrixXd chain(n, 1);
  for (int i = 0; i < 500 + n; ++i) {
    alpha = hyper_alpha_step(alpha, q, ll, rng);
    CHECK(alpha.theta[0] > 0.0);
    CHECK(alpha.theta[0] < 2.0);
    if (i >= 500) chain(i - 500, 0) = alpha.theta[0];
  }
  // Quadrature over z, moments of sigma_y.
  const int m = 40000;
  const double a = -18.0, b = 18.0, h = (b - a) / m;
  std::vector<double> lp(m);
  double mx = -1e300;
  for (int i = 0; i < m; ++i) {
    const double z = a + (i + 0.5) * h;
    const double s = 2.0 * oracle::sigmoid(z);
    lp[i] = -0.5 * z * z / 2.25 + gauss_ll(f, y, s);
    mx = std::max(mx, lp[i]);
  }
  double w0 = 0, m1 = 0, m2 = 0;
  for (int i = 0; i < m; ++i) {
    const double s = 2.0 * oracle::sigmoid(a + (i + 0.5) * h);
    const double w = std::exp(lp[i] - mx);
    w0 += w;
    m1 += w * s;
    m2 += w * s * s;
  }
  const double mean = m1 / w0, sd = std::sqrt(m2 / w0 - mean * mean);
  check_moments(chain, Eigen::VectorXd::Constant(1, mean), Eigen::VectorXd::Constant(1, sd), 3.0);
}

TEST_CASE("surrogate_posterior agrees with conjugate conditioning") {
  RngStream rng(13);
  auto prior = conditional_prior({}, line_inputs(4), KernelParams(Eigen::VectorXd::Ones(1), 1.0, 1.2));
  prior.mean = rng.normal_vector(4);
  const Eigen::VectorXd s = 0.3 * prior.cov.diagonal();
  const Eigen::VectorXd g = rng.normal_vector(4);
  const auto post = surrogate_posterior(prior, s, g, 1.44);
  const Eigen::MatrixXd A = prior.cov + Eigen::MatrixXd(s.asDiagonal());
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  const Eigen::VectorXd mean = prior.mean + prior.cov * lu.solve(g - prior.mean);
  const Eigen::MatrixXd cov = prior.cov - prior.cov * lu.solve(prior.cov);
  CHECK((post.mean - mean).norm() < 1e-9);
  CHECK((post.chol * post.chol.transpose() - cov).norm() < 1e-6);
  CHECK(post.log_marginal == doctest::Approx(oracle::mvn_logpdf(g, prior.mean, A)).epsilon(1e-9));

  // Vanishing surrogate noise: the posterior mean collapses onto g.
  const auto tight = surrogate_posterior(prior, Eigen::VectorXd::Constant(4, 1e-12), g, 1.44);
  CHECK((tight.mean - g).norm() < 1e-6);
}

TEST_CASE("sdss_step under a constant likelihood preserves the joint prior") {
  RngStream rng(55);
  const InputSet in(Eigen::Vector2d(0.0, 0.5), Eigen::MatrixXd::Zero(2, 0));
  const auto q = SsgSpec::non_informative(Eigen::Vector2d(0.2, 0.3), Eigen::Vector2d(1.5, 2.0));
  const PriorFn prior = [&](const KernelParams& k) { return conditional_prior({}, in, k); };
  const LogLikFn flat = [](const Eigen::VectorXd&) { return 0.0; };

  auto kappa = HyperState::from_z(Eigen::Vector2d(0.0, 0.0), q);
  auto cond = prior(KernelParams::from_vector(kappa.theta));
  Eigen::VectorXd f = prior_draw(cond, rng.normal_vector(2));
  const int n = 20000;
  Eigen::MatrixXd chain(n, 4);
  for (int i = 0; i < n; ++i) {
    f = ess_step(f, cond.mean, cond.chol, flat, rng);
    auto upd = sdss_step(f, cond, kappa, q, prior, flat, rng, kDefaultAuxScale);
    CHECK((upd.kappa.theta.array() > q.lower().array()).all());
    CHECK((upd.kappa.theta.array() < q.upper().array()).all());
    kappa = upd.kappa;
    f = upd.f;
    cond = upd.prior;
    chain.row(i) << kappa.theta.transpose(), f.transpose();
  }

  // Ancestral draws from p(kappa) p(f | kappa).
  const int m = 200000;
  Eigen::MatrixXd anc(m, 4);
  for (int i = 0; i < m; ++i) {
    const auto k = HyperState::from_z(1.5 * rng.normal_vector(2), q);
    const auto c = prior(KernelParams::from_vector(k.theta));
    anc.row(i) << k.theta.transpose(), prior_draw(c, rng.normal_vector(2)).transpose();
  }
  for (Eigen::Index j = 0; j < 4; ++j) {
    const Eigen::VectorXd c = chain.col(j), a = anc.col(j);
    const double ma = a.mean();
    const double sa = std::sqrt((a.array() - ma).square().sum() / (m - 1));
    const double mc = c.mean();
    const double sc = std::sqrt((c.array() - mc).square().sum() / (n - 1));
    CHECK(std::abs(mc - ma) < 4 * std::hypot(mc_se_mean(c), sa / std::sqrt(m)));
    CHECK(std::abs(sc - sa) < 4 * std::hypot(mc_se_sd(c), sa / std::sqrt(2.0 * m)));
  }
  CHECK_THROWS_AS(sdss_step(f, cond, kappa, q, prior, flat, rng, 0.0), InvalidInput);
}
