#include "seqgp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seqgp/error.hpp"

namespace seqgp {

double effective_sample_size(const Eigen::VectorXd& chain) {
  const Eigen::Index n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const Eigen::VectorXd c = chain.array() - chain.mean();
  const double gamma0 = c.squaredNorm() / static_cast<double>(n);
  if (!(gamma0 > 0.0)) return static_cast<double>(n);
  auto autocov = [&](Eigen::Index lag) {
    return c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n);
  };
  // Initial monotone sequence estimator on paired autocovariances.
  double sum_pairs = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double pair = (m == 0 ? gamma0 : autocov(2 * m)) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    sum_pairs += pair;
    prev = pair;
  }
  const double tau = std::max((-gamma0 + 2.0 * sum_pairs) / gamma0, 1e-12);
  return std::clamp(static_cast<double>(n) / tau, 1.0, static_cast<double>(n));
}

double mc_se_mean(const Eigen::VectorXd& chain) {
  if (chain.size() < 2) return 0.0;
  const double var = (chain.array() - chain.mean()).square().sum() /
                     static_cast<double>(chain.size() - 1);
  return std::sqrt(var / effective_sample_size(chain));
}

double mc_se_sd(const Eigen::VectorXd& chain) {
  if (chain.size() < 2) return 0.0;
  const double var = (chain.array() - chain.mean()).square().sum() /
                     static_cast<double>(chain.size() - 1);
  return std::sqrt(var / (2.0 * effective_sample_size(chain)));
}

Eigen::VectorXd column_means(const Eigen::MatrixXd& samples) {
  return samples.colwise().mean().transpose();
}

Eigen::VectorXd column_sds(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) return Eigen::VectorXd::Zero(samples.cols());
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  return ((samples.rowwise() - mean).colwise().squaredNorm() /
          static_cast<double>(samples.rows() - 1))
      .cwiseSqrt()
      .transpose();
}

double band_coverage(const Eigen::MatrixXd& samples, const Eigen::VectorXd& truth) {
  if (samples.cols() != truth.size() || truth.size() == 0) {
    throw InvalidInput("band_coverage: truth does not match the sample width");
  }
  const Eigen::VectorXd mean = column_means(samples);
  const Eigen::VectorXd sd = column_sds(samples);
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (std::abs(truth[i] - mean[i]) <= 2.0 * sd[i]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(truth.size());
}

CoverageMetrics coverage_report(const SampleSet& samples,
                                const std::optional<Eigen::VectorXd>& truth_shifted,
                                const std::optional<Eigen::VectorXd>& y, RngStream& rng) {
  CoverageMetrics out;
  out.t = samples.t;
  if (samples.size() == 0) throw InvalidInput("coverage_report: empty sample");
  Eigen::MatrixXd shifted = samples.f_matrix();
  out.n = static_cast<std::size_t>(shifted.cols());
  const Eigen::MatrixXd alpha = samples.alpha_matrix();
  if (alpha.cols() < 2) throw InvalidInput("coverage_report: alpha must be (mu_f, sigma_y)");
  shifted.colwise() += alpha.col(0);
  if (truth_shifted) out.coverage = band_coverage(shifted, *truth_shifted);
  if (y) {
    if (y->size() != shifted.cols()) throw InvalidInput("coverage_report: y size mismatch");
    Eigen::MatrixXd pred = shifted;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      pred.row(i) += alpha(i, 1) * rng.normal_vector(pred.cols()).transpose();
    }
    const Eigen::VectorXd mean = column_means(pred);
    const Eigen::VectorXd sd = column_sds(pred);
    std::size_t outside = 0;
    for (Eigen::Index j = 0; j < y->size(); ++j) {
      if (std::abs((*y)[j] - mean[j]) > 2.0 * sd[j]) ++outside;
    }
    out.y_outside = outside;
  }
  return out;
}

double spatial_mean(const SampleState& s) { return s.f.mean(); }

double level_mean(const SampleState& s) {
  if (s.alpha.size() < 1) throw InvalidInput("level_mean: state has no alpha");
  return s.f.mean() + s.alpha[0];
}

namespace {

struct PhiMoments {
  double mean = 0.0;
  double var = 0.0;
  double se_var = 0.0;
};

PhiMoments phi_moments(const SampleSet& set, const Functional& phi) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(set.size()));
  for (std::size_t i = 0; i < set.size(); ++i) v[static_cast<Eigen::Index>(i)] = phi(set.states[i]);
  PhiMoments m;
  m.mean = v.mean();
  m.var = (v.array() - m.mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(v.size() - 1, 1));
  m.se_var = m.var * std::sqrt(2.0 / effective_sample_size(v));
  return m;
}

double fit_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
  double xy = 0.0, xx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
  }
  return xx > 0.0 ? xy / xx : 0.0;
}

}  // namespace

BiasVarianceReport bias_variance_report(std::span<const SampleSet> seq_sets,
                                        std::span<const SampleSet> full_sets,
                                        std::span<const double> seq_times,
                                        std::span<const double> full_times,
                                        const BiasVarianceOptions& opts) {
  const std::size_t T = seq_sets.size();
  if (T == 0 || full_sets.size() != T || seq_times.size() != T || full_times.size() != T) {
    throw InvalidInput("bias_variance_report: runs must cover the same steps");
  }
  if (opts.tau < 1) throw InvalidInput("bias_variance_report: tau must be >= 1");
  for (std::size_t t = 0; t < T; ++t) {
    const auto& a = seq_sets[t].inputs;
    const auto& b = full_sets[t].inputs;
    if (seq_sets[t].t != full_sets[t].t || a.size() != b.size() || a.dim() != b.dim() ||
        a.t != b.t || a.x != b.x) {
      throw InvalidInput("bias_variance_report: runs were not made on identical data (step " +
                         std::to_string(t + 1) + ")");
    }
  }

  const double n = static_cast<double>(seq_sets[0].inputs.size());
  const double n3 = n * n * n;
  const double tau3 = std::pow(static_cast<double>(opts.tau), 3);

  BiasVarianceReport rep;
  std::vector<double> xf, yf, xs, ys;
  double cum_seq = 0.0, total_full = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double tt = static_cast<double>(seq_sets[t].t);
    cum_seq += seq_times[t];
    total_full += full_times[t];
    xf.push_back(tt * tt * tt * n3);
    yf.push_back(full_times[t]);
    xs.push_back(tt * tau3 * n3);
    ys.push_back(cum_seq);
  }
  rep.c_full = fit_through_origin(xf, yf);
  rep.c_seq = fit_through_origin(xs, ys);
  rep.t_budget = opts.t_budget > 0.0 ? opts.t_budget : total_full;

  for (std::size_t t = 0; t < T; ++t) {
    const PhiMoments s = phi_moments(seq_sets[t], opts.phi);
    const PhiMoments f = phi_moments(full_sets[t], opts.phi);
    BiasVarianceRow row;
    row.t = seq_sets[t].t;
    row.var_seq = s.var;
    row.var_full = f.var;
    row.ratio = f.var > 0.0 ? s.var / f.var : std::numeric_limits<double>::infinity();
    if (f.var > 0.0 && s.var > 0.0) {
      row.se_ratio = row.ratio * std::hypot(s.se_var / s.var, f.se_var / f.var);
    }
    row.bias = std::abs(s.mean - f.mean);
    row.time_seq_s = seq_times[t];
    row.time_full_s = full_times[t];
    row.delta = f.var * rep.c_full * xf[t] / rep.t_budget -
                s.var * rep.c_seq * xs[t] / rep.t_budget - row.bias * row.bias;
    rep.rows.push_back(row);
  }
  return rep;
}

HalfPlaneSplit half_plane_split(const InputSet& inputs, double threshold) {
  if (inputs.dim() < 1) throw InvalidInput("half_plane_split: inputs have no spatial coordinate");
  HalfPlaneSplit s;
  for (Eigen::Index i = 0; i < inputs.size(); ++i) {
    (inputs.x(i, 0) <= threshold ? s.train : s.test).push_back(i);
  }
  if (s.train.empty() || s.test.empty()) {
    throw InvalidInput("half_plane_split: one side of the split is empty");
  }
  return s;
}

Eigen::VectorXd running_mean(const Eigen::VectorXd& values) {
  Eigen::VectorXd out(values.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    sum += values[i];
    out[i] = sum / static_cast<double>(i + 1);
  }
  return out;
}

PredictTraces predict_experiment(std::span<const SampleSet> history, const RegressionModel& model,
                                 std::size_t step, const HalfPlaneSplit& split,
                                 const RunConfig& cfg, RngStream& rng,
                                 bool condition_on_window) {
  if (history.empty()) throw InvalidInput("predict_experiment: needs at least one previous step");
  const RegressionModel train_model = model.with_step_subset(step, split.train);
  const InputSet x_star = model.inputs(step).subset(split.test);
  Eigen::VectorXd y_star(static_cast<Eigen::Index>(split.test.size()));
  for (std::size_t j = 0; j < split.test.size(); ++j) {
    y_star[static_cast<Eigen::Index>(j)] = model.observations(step)[split.test[j]];
  }
  const InputSet& x_obs = train_model.inputs(step);

  auto score = [&](const SampleSet& fitted, std::span<const SampleSet> window) {
    Eigen::VectorXd ll(static_cast<Eigen::Index>(fitted.size()));
    std::vector<LatentBlock> blocks(window.size());
    for (std::size_t i = 0; i < fitted.size(); ++i) {
      for (std::size_t w = 0; w < window.size(); ++w) {
        blocks[w] = LatentBlock{window[w].states[i].f, window[w].inputs};
      }
      const SampleState& s = fitted.states[i];
      const LatentBlock observed{s.f, x_obs};
      const auto cond =
          predictive_conditionals(blocks, observed, x_star, KernelParams::from_vector(s.kappa));
      ll[static_cast<Eigen::Index>(i)] = predictive_loglik(cond.mean, cond.cov, s.alpha, y_star);
    }
    return ll;
  };

  PredictTraces out;
  const SampleSet seq = sequential_step(history, train_model, step, cfg, rng);
  out.ll_sequential =
      score(seq, condition_on_window ? history : std::span<const SampleSet>{});
  const SampleSet free = initial_sample(train_model, step, cfg, rng);
  out.ll_history_free = score(free, {});
  out.sequential = running_mean(out.ll_sequential);
  out.history_free = running_mean(out.ll_history_free);
  return out;
}

}  // namespace seqgp
