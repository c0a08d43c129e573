#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "seqgp/error.hpp"
#include "seqgp/likelihood.hpp"
#include "seqgp/rng.hpp"

using namespace seqgp;

TEST_CASE("gauss_loglik values") {
  const double two_pi = 2.0 * std::numbers::pi;
  const Eigen::Vector2d alpha(0.5, 0.3);
  const Eigen::Vector3d f(0.1, -0.2, 0.7);
  const Eigen::Vector3d y = f.array() + 0.5;
  CHECK(gauss_loglik(f, alpha, y) == doctest::Approx(-1.5 * std::log(two_pi * 0.09)));

  const Eigen::VectorXd f1 = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd y1 = Eigen::VectorXd::Constant(1, 0.5 + 0.3);
  CHECK(gauss_loglik(f1, alpha, y1) == doctest::Approx(-0.5 * std::log(two_pi * 0.09) - 0.5));

  const Eigen::Vector2d f2(0.0, 0.0), y2(0.5, 0.8);
  const double expected = -std::log(two_pi * 0.09) - (0.0 + 0.09 / 0.18);
  CHECK(gauss_loglik(f2, alpha, y2) == doctest::Approx(expected).epsilon(1e-14));

  CHECK_THROWS_AS(gauss_loglik(f2, Eigen::Vector2d(0.5, 0.0), y2), InvalidInput);
  CHECK_THROWS_AS(gauss_loglik(f, alpha, y2), InvalidInput);
}

TEST_CASE("gauss_loglik is maximised at f = y - mu_f") {
  RngStream rng(3);
  const Eigen::Vector2d alpha(0.2, 0.4);
  const Eigen::VectorXd y = rng.normal_vector(6);
  const Eigen::VectorXd best = y.array() - 0.2;
  const double top = gauss_loglik(best, alpha, y);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd other = best + 1e-3 * rng.normal_vector(6);
    CHECK(gauss_loglik(other, alpha, y) < top);
  }
}

TEST_CASE("generate_regression_dataset shapes and noiseless limit") {
  RegressionConfig cfg;
  cfg.t_steps = 4;
  cfg.n_per_step = 30;
  cfg.seed = 9;
  const auto d = generate_regression_dataset(cfg);
  CHECK(d.inputs.size() == 4);
  std::size_t total = 0;
  for (const auto& in : d.inputs) total += static_cast<std::size_t>(in.size());
  CHECK(total == 120);
  CHECK(d.inputs[0].t[0] == 0.0);
  CHECK(d.inputs[3].t[0] == doctest::Approx(1.0));
  CHECK(d.inputs[1].t[0] == doctest::Approx(1.0 / 3.0));
  CHECK((d.kappa_true.head(3).array() > 0.0).all());
  CHECK((d.kappa_true.head(3).array() < std::sqrt(10.0)).all());
  CHECK(d.kappa_true[3] == 1.0);
  CHECK(d.inputs[2].x.minCoeff() >= 0.0);
  CHECK(d.inputs[2].x.maxCoeff() <= 1.0);

  cfg.sigma_y = 0.0;
  const auto z = generate_regression_dataset(cfg);
  for (std::size_t t = 0; t < z.y.size(); ++t) {
    CHECK(((z.y[t].array() - cfg.mu_f) - z.f_true[t].array()).abs().maxCoeff() < 1e-15);
  }
  CHECK(generate_regression_dataset(cfg).y[2] == z.y[2]);
}

TEST_CASE("generated latent values have unit prior variance") {
  RegressionConfig cfg;
  cfg.t_steps = 1;
  cfg.n_per_step = 1;
  std::vector<double> vals;
  for (std::uint64_t s = 0; s < 4000; ++s) {
    cfg.seed = s;
    vals.push_back(generate_regression_dataset(cfg).f_true[0][0]);
  }
  const double n = static_cast<double>(vals.size());
  const double var = std::inner_product(vals.begin(), vals.end(), vals.begin(), 0.0) / n;
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("RegressionModel and subsets") {
  RegressionConfig cfg;
  cfg.t_steps = 2;
  cfg.n_per_step = 6;
  const auto d = generate_regression_dataset(cfg);
  const auto m = d.model();
  CHECK(m.num_steps() == 2);
  CHECK(m.alpha_dim() == 2);
  const Eigen::Vector2d alpha(0.5, 0.3);
  CHECK(m.log_likelihood(1, d.f_true[1], alpha) == gauss_loglik(d.f_true[1], alpha, d.y[1]));
  const Eigen::Index idx[] = {0, 3, 5};
  const auto sub = m.with_step_subset(1, idx);
  CHECK(sub.inputs(1).size() == 3);
  CHECK(sub.observations(1)[1] == d.y[1][3]);
  CHECK(sub.inputs(0).size() == 6);
  CHECK_THROWS(m.log_likelihood(5, d.f_true[1], alpha));

  // log_likelihood = -|r|^2 / 2 + c(alpha).
  const Eigen::VectorXd f2 = d.f_true[1].array() + 0.2;
  const Eigen::VectorXd r1 = m.standardized_residuals(1, d.f_true[1], alpha);
  const Eigen::VectorXd r2 = m.standardized_residuals(1, f2, alpha);
  CHECK(r1[2] == doctest::Approx((d.y[1][2] - d.f_true[1][2] - 0.5) / 0.3));
  CHECK(m.log_likelihood(1, d.f_true[1], alpha) - m.log_likelihood(1, f2, alpha) ==
        doctest::Approx(-0.5 * (r1.squaredNorm() - r2.squaredNorm())));
  CHECK_THROWS_AS(m.standardized_residuals(1, d.f_true[1], Eigen::Vector2d(0.5, 0.0)), InvalidInput);
}

TEST_CASE("predictive_conditionals examples") {
  RngStream rng(4);
  const KernelParams k(Eigen::Vector2d(0.5, 0.5), 0.5, 1.0);
  Eigen::MatrixXd x(3, 2);
  x << 0.1, 0.2, 0.6, 0.3, 0.4, 0.9;
  const InputSet xo(Eigen::VectorXd::Constant(3, 0.5), x);
  const LatentBlock obs{rng.normal_vector(3), xo};
  const auto same = predictive_conditionals({}, obs, xo, k);
  CHECK((same.mean - obs.values).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(predictive_conditionals({}, obs, InputSet{}, k).size() == 0);

  // Two-point case with one window point against brute-force conditioning.
  const InputSet xw(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 2, 0.5));
  const LatentBlock win{Eigen::VectorXd::Constant(1, 0.7), xw};
  Eigen::MatrixXd xs(2, 2);
  xs << 0.8, 0.1, 0.7, 0.7;
  const InputSet xstar(Eigen::VectorXd::Constant(2, 0.5), xs);
  const auto c = predictive_conditionals(std::span(&win, 1), obs, xstar, k);
  const InputSet* parts[] = {&xw, &xo, &xstar};
  const auto all = InputSet::concat(parts);
  const Eigen::MatrixXd K = oracle::gram(all.t, all.x, k.lengthscales_x(), 0.5, 1.0);
  Eigen::VectorXd a(4);
  a << win.values, obs.values;
  const auto ref = oracle::condition(K, Eigen::VectorXd::Zero(6), 4, a);
  CHECK((c.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((c.cov - ref.cov).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("predictive_loglik examples") {
  const double two_pi = 2.0 * std::numbers::pi;
  const Eigen::Vector2d alpha(0.5, 0.3);
  const Eigen::Vector3d mean(0.1, 0.2, 0.3);
  const Eigen::Vector3d y = mean.array() + 0.5;
  CHECK(predictive_loglik(mean, Eigen::MatrixXd::Zero(3, 3), alpha, y) ==
        doctest::Approx(-1.5 * std::log(two_pi * 0.09)).epsilon(1e-14));

  const Eigen::VectorXd m1 = Eigen::VectorXd::Constant(1, 0.2);
  const Eigen::MatrixXd c1 = Eigen::MatrixXd::Constant(1, 1, 0.16);
  const Eigen::VectorXd y1 = Eigen::VectorXd::Constant(1, 1.1);
  const double v = 0.16 + 0.09, r = 1.1 - 0.7;
  CHECK(predictive_loglik(m1, c1, alpha, y1) ==
        doctest::Approx(-0.5 * std::log(two_pi * v) - 0.5 * r * r / v).epsilon(1e-14));

  RngStream rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd m = rng.normal_vector(3), ys = rng.normal_vector(3);
    Eigen::MatrixXd B(3, 3);
    for (int i = 0; i < 3; ++i) B.row(i) = rng.normal_vector(3).transpose();
    const Eigen::MatrixXd C = B * B.transpose();
    const Eigen::Vector2d a(rng.normal(), rng.uniform(0.1, 1.0));
    const Eigen::MatrixXd S = C + a[1] * a[1] * Eigen::MatrixXd::Identity(3, 3);
    const Eigen::VectorXd shifted = m.array() + a[0];
    CHECK(std::abs(predictive_loglik(m, C, a, ys) - oracle::mvn_logpdf(ys, shifted, S)) < 1e-8);
  }
}

TEST_CASE("predictive_loglik is invariant to joint permutation") {
  RngStream rng(10);
  const Eigen::VectorXd m = rng.normal_vector(4), ys = rng.normal_vector(4);
  Eigen::MatrixXd B(4, 4);
  for (int i = 0; i < 4; ++i) B.row(i) = rng.normal_vector(4).transpose();
  const Eigen::MatrixXd C = B * B.transpose();
  const Eigen::Vector2d a(0.3, 0.4);
  Eigen::PermutationMatrix<Eigen::Dynamic> P(4);
  P.indices() << 2, 0, 3, 1;
  const Eigen::VectorXd mp = P * m, yp = P * ys;
  const Eigen::MatrixXd Cp = P * C * P.transpose();
  CHECK(predictive_loglik(mp, Cp, a, yp) == doctest::Approx(predictive_loglik(m, C, a, ys)).epsilon(1e-13));
}
