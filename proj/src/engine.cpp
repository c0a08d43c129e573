#include "seqgp/engine.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "seqgp/error.hpp"
#include "seqgp/samplers.hpp"

namespace seqgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kInitialDrawRetries = 50;
constexpr int kModeRounds = 12;
constexpr double kFdStep = 1e-6;
constexpr double kModeGradTol = 1e-6;
constexpr double kModeRelTol = 1e-10;
constexpr double kMinDamping = 1e-9;
constexpr double kMaxDamping = 1e10;
constexpr int kModeAlphaUpdates = 10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Gibbs-style chain over (f, kappa, alpha) for one latent block.
struct Chain {
  const RunConfig& cfg;
  RngStream& rng;
  PriorFn prior;
  LogLikFn loglik_f;  // uses `alpha` below
  std::function<double(const Eigen::VectorXd& f, const Eigen::VectorXd& alpha)> loglik;

  SsgSpec q;  // joint (kappa; alpha) prior or refit posterior
  Eigen::VectorXd z;
  Eigen::VectorXd kappa;
  Eigen::VectorXd alpha;
  Eigen::VectorXd f;
  GpConditional cond;
  double ll = kNegInf;
  long long proposals = 0;

  Chain(const RunConfig& c, RngStream& r, SsgSpec spec)
      : cfg(c), rng(r), q(std::move(spec)) {
    loglik_f = [this](const Eigen::VectorXd& v) { return loglik(v, alpha); };
  }

  Eigen::Index kd() const { return cfg.kappa_dim(); }
  Eigen::Index ad() const { return cfg.alpha_dim(); }

  void set_hyper(const Eigen::VectorXd& k, const Eigen::VectorXd& a) {
    Eigen::VectorXd theta(kd() + ad());
    theta << k, a;
    z = ssg_inverse_clipped(theta, q);
    const Eigen::VectorXd th = ssg_forward(z, q);
    kappa = th.head(kd());
    alpha = th.tail(ad());
  }

  void refresh_prior() { cond = prior(KernelParams::from_vector(kappa)); }

  /// Fresh draw from the conditional prior at the current kappa.
  void draw_latent() {
    refresh_prior();
    for (int attempt = 0; attempt < kInitialDrawRetries; ++attempt) {
      f = prior_draw(cond, rng.normal_vector(cond.size()));
      ll = loglik_f(f);
      if (ll > kNegInf) return;
    }
    throw NumericalError("could not draw an initial latent state with finite likelihood");
  }

  void update_latent(int reps) {
    for (int r = 0; r < reps; ++r) {
      auto res = ess_step(f, ll, cond.mean, cond.chol, loglik_f, rng);
      f = std::move(res.state);
      ll = res.loglik;
      proposals += res.proposals;
    }
  }

  void update_kappa(bool surrogate) {
    const SsgSpec spec = q.conditional_block(0, kd(), z);
    const HyperState state{z.head(kd()), kappa};
    auto upd = surrogate ? sdss_step(f, cond, state, spec, prior, loglik_f, rng, cfg.aux_scale)
                         : hyper_kappa_step(f, cond, state, spec, prior, loglik_f, rng);
    z.head(kd()) = upd.kappa.z;
    kappa = upd.kappa.theta;
    f = std::move(upd.f);
    cond = std::move(upd.prior);
    ll = loglik_f(f);
    proposals += upd.proposals;
  }

  void update_alpha() {
    const SsgSpec spec = q.conditional_block(kd(), ad(), z);
    const HyperState state{z.tail(ad()), alpha};
    auto loglik_alpha = [this](const Eigen::VectorXd& a) { return loglik(f, a); };
    const auto upd = hyper_alpha_step(state, spec, loglik_alpha, rng);
    z.tail(ad()) = upd.z;
    alpha = upd.theta;
    ll = loglik_f(f);
    proposals += 1;
  }

  SampleState snapshot() const {
    SampleState s;
    s.f = f;
    s.kappa = kappa;
    s.alpha = alpha;
    Eigen::VectorXd theta(kd() + ad());
    theta << kappa, alpha;
    s.z = ssg_inverse_clipped(theta, q);
    return s;
  }
};

Eigen::VectorXd column_sd(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) return Eigen::VectorXd::Zero(samples.cols());
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd c = samples.rowwise() - mean;
  return (c.colwise().squaredNorm() / static_cast<double>(samples.rows() - 1))
      .cwiseSqrt()
      .transpose();
}

void fill_diag(StepDiagnostics* diag, const SampleSet& set, double seconds, long long proposals) {
  if (diag == nullptr) return;
  diag->t = set.t;
  diag->wall_time_s = std::max(seconds, 1e-9);
  diag->posterior_sd = column_sd(set.f_matrix());
  diag->proposals = proposals;
}

/// Runs n_initial iterations of the exact-target chain and returns the
/// thinned retained states.
std::vector<SampleState> run_exact_chain(Chain& chain, const RunConfig& cfg) {
  std::vector<SampleState> kept;
  kept.reserve(cfg.m_samples);
  for (std::size_t it = 0; it < cfg.n_initial && kept.size() < cfg.m_samples; ++it) {
    chain.update_latent(cfg.ess_reps);
    chain.update_kappa(true);
    chain.update_alpha();
    if (it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0) {
      kept.push_back(chain.snapshot());
    }
  }
  return kept;
}

}  // namespace

Eigen::MatrixXd SampleSet::f_matrix() const {
  if (states.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(states.size()), states[0].f.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = states[i].f.transpose();
  }
  return out;
}

Eigen::MatrixXd SampleSet::kappa_matrix() const {
  if (states.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(states.size()), states[0].kappa.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = states[i].kappa.transpose();
  }
  return out;
}

Eigen::MatrixXd SampleSet::alpha_matrix() const {
  if (states.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(states.size()), states[0].alpha.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = states[i].alpha.transpose();
  }
  return out;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidInput("RunConfig: " + what); };
  if (t_steps < 1) fail("t_steps must be >= 1");
  if (m_samples < 2) fail("m_samples must be >= 2");
  if (thin < 1) fail("thin must be >= 1");
  if (burn_in >= n_initial) fail("burn_in must be < n_initial");
  if ((n_initial - burn_in) / thin < m_samples) {
    fail("(n_initial - burn_in) / thin must be >= m_samples");
  }
  if (t_steps > 1 && tau < 1) fail("tau must be >= 1 for sequential runs");
  if (ess_reps < 1 || ess_reps > 10) fail("ess_reps must be in 1..10");
  if (!(aux_scale > 0.0)) fail("aux_scale must be positive");
  if (kappa_max.size() < 2 || kappa_min.size() != kappa_max.size()) {
    fail("kappa bounds must have equal length >= 2");
  }
  if (alpha_max.size() < 1 || alpha_min.size() != alpha_max.size()) {
    fail("alpha bounds must have equal length >= 1");
  }
  if (!(kappa_min.array() >= 0.0).all() || !(kappa_min.array() < kappa_max.array()).all()) {
    fail("kappa bounds must satisfy 0 <= min < max");
  }
  if (!(alpha_min.array() < alpha_max.array()).all()) fail("alpha bounds must satisfy min < max");
}

SsgSpec RunConfig::hyper_prior() const {
  Eigen::VectorXd lo(kappa_dim() + alpha_dim()), hi(kappa_dim() + alpha_dim());
  lo << kappa_min, alpha_min;
  hi << kappa_max, alpha_max;
  return SsgSpec::non_informative(lo, hi);
}

namespace {

/// Residuals [r(m + L nu); nu; L_z^-1 (z - m_z)] of the whitened mode problem.
/// The unknowns are x = (nu; z_kappa).
struct ModeResiduals {
  const LikelihoodModel& model;
  std::size_t step;
  const SsgSpec& kappa_prior;
  const Eigen::VectorXd& alpha;
  Eigen::Index n_latent;
  Eigen::Index n_obs;

  Eigen::Index size() const { return n_obs + n_latent + kappa_prior.dim(); }

  Eigen::VectorXd latent(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd kappa = ssg_forward(x.tail(kappa_prior.dim()), kappa_prior);
    const auto cond = conditional_prior({}, model.inputs(step), KernelParams::from_vector(kappa));
    return prior_draw(cond, x.head(n_latent));
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(size());
    try {
      out.head(n_obs) = model.standardized_residuals(step, latent(x), alpha);
    } catch (const NumericalError&) {
      out.head(n_obs).setConstant(kFailedResidual);
    } catch (const InvalidInput&) {
      out.head(n_obs).setConstant(kFailedResidual);
    }
    out.segment(n_obs, n_latent) = x.head(n_latent);
    out.tail(kappa_prior.dim()) = kappa_prior.chol_z().triangularView<Eigen::Lower>().solve(
        x.tail(kappa_prior.dim()) - kappa_prior.mean_z());
    return out;
  }

  static constexpr double kFailedResidual = 1e8;
};

/// Forward-difference Jacobian of `fn` at x, where r = fn(x).
template <class Fn>
Eigen::MatrixXd fd_jacobian(const Fn& fn, const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
  Eigen::MatrixXd J(r.size(), x.size());
  Eigen::VectorXd xh = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = kFdStep * std::max(1.0, std::abs(x[j]));
    xh[j] = x[j] + h;
    J.col(j) = (fn(xh) - r) / h;
    xh[j] = x[j];
  }
  return J;
}

}  // namespace

ModeStart posterior_mode(const LikelihoodModel& model, std::size_t step,
                         const SsgSpec& kappa_prior, const ModeStart& start,
                         const Eigen::VectorXd& alpha, int max_jacobians) {
  if (max_jacobians < 1) throw InvalidInput("posterior_mode: max_jacobians must be >= 1");
  if (start.f.size() != model.inputs(step).size() || start.kappa.z.size() != kappa_prior.dim()) {
    throw InvalidInput("posterior_mode: start does not match the model or prior");
  }
  if ((kappa_prior.chol_z().diagonal().array() <= 0.0).any()) {
    throw InvalidInput("posterior_mode: kappa prior must have a non-degenerate z covariance");
  }
  const Eigen::VectorXd r_start = model.standardized_residuals(step, start.f, alpha);
  if (r_start.size() == 0) return start;

  const Eigen::Index n = start.f.size();
  const ModeResiduals fn{model, step, kappa_prior, alpha, n, r_start.size()};
  Eigen::VectorXd x(n + kappa_prior.dim());
  const auto cond0 = conditional_prior({}, model.inputs(step),
                                       KernelParams::from_vector(start.kappa.theta));
  x << whiten(cond0, start.f), start.kappa.z;
  Eigen::VectorXd r = fn(x);
  double obj = r.squaredNorm();
  const double obj_start = obj;

  // Levenberg-Marquardt: solve (J'J + lambda diag(J'J)) dx = -J'r.
  double lambda = 1e-3;
  bool done = false;
  for (int it = 0; it < max_jacobians && !done; ++it) {
    const Eigen::MatrixXd J = fd_jacobian(fn, x, r);
    const Eigen::VectorXd g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < kModeGradTol) break;
    const Eigen::MatrixXd A = J.transpose() * J;
    bool accepted = false;
    while (!accepted && lambda < kMaxDamping) {
      Eigen::MatrixXd D = A;
      D.diagonal() += lambda * A.diagonal().cwiseMax(1.0);
      const Eigen::VectorXd x_new = x + D.ldlt().solve(-g);
      const Eigen::VectorXd r_new = fn(x_new);
      const double obj_new = r_new.squaredNorm();
      if (obj_new < obj) {
        accepted = true;
        const double gain = obj - obj_new;
        x = x_new;
        r = r_new;
        obj = obj_new;
        lambda = std::max(lambda / 3.0, kMinDamping);
        done = gain < kModeRelTol * obj;
      } else {
        lambda *= 4.0;
      }
    }
    done = done || !accepted;
  }

  if (!(obj < obj_start)) return start;
  ModeStart out;
  out.f = fn.latent(x);
  out.kappa = HyperState::from_z(x.tail(kappa_prior.dim()), kappa_prior);
  return out;
}

double safe_loglik(const LikelihoodModel& model, std::size_t step, const Eigen::VectorXd& f,
                   const Eigen::VectorXd& alpha) {
  try {
    return model.log_likelihood(step, f, alpha);
  } catch (const NumericalError&) {
    return kNegInf;
  } catch (const InvalidInput&) {
    return kNegInf;
  }
}

SampleSet initial_sample(const LikelihoodModel& model, std::size_t step, const RunConfig& cfg,
                         RngStream& rng, StepDiagnostics* diag) {
  cfg.validate();
  if (model.alpha_dim() != cfg.alpha_dim()) throw InvalidInput("alpha bounds do not match model");
  const auto start = Clock::now();
  const InputSet& inputs = model.inputs(step);
  if (inputs.dim() + 2 != cfg.kappa_dim()) {
    throw InvalidInput("kappa bounds do not match the input dimension");
  }

  Chain chain(cfg, rng, cfg.hyper_prior());
  chain.prior = [&inputs](const KernelParams& k) { return conditional_prior({}, inputs, k); };
  chain.loglik = [&](const Eigen::VectorXd& f, const Eigen::VectorXd& a) {
    return safe_loglik(model, step, f, a);
  };
  const Eigen::VectorXd theta0 = ssg_forward(chain.q.mean_z(), chain.q);
  chain.set_hyper(theta0.head(cfg.kappa_dim()), theta0.tail(cfg.alpha_dim()));
  chain.draw_latent();
  if (cfg.mode_start) {
    // Alternate the (f, kappa) mode fit with alpha updates so that the noise
    // scale and the fit settle together.
    for (int round = 0; round < kModeRounds; ++round) {
      const SsgSpec kappa_prior = chain.q.conditional_block(0, cfg.kappa_dim(), chain.z);
      const ModeStart m = posterior_mode(model, step, kappa_prior,
                                         {chain.f, {chain.z.head(cfg.kappa_dim()), chain.kappa}},
                                         chain.alpha);
      chain.z.head(cfg.kappa_dim()) = m.kappa.z;
      chain.kappa = m.kappa.theta;
      chain.refresh_prior();
      chain.f = m.f;
      chain.ll = chain.loglik_f(chain.f);
      for (int a = 0; a < kModeAlphaUpdates; ++a) chain.update_alpha();
    }
  }

  SampleSet out;
  out.t = step + 1;
  out.inputs = inputs;
  out.states = run_exact_chain(chain, cfg);
  fill_diag(diag, out, seconds_since(start), chain.proposals);
  return out;
}

SampleSet sequential_step(std::span<const SampleSet> window, const LikelihoodModel& model,
                          std::size_t step, const RunConfig& cfg, RngStream& rng,
                          StepDiagnostics* diag) {
  cfg.validate();
  if (window.empty()) throw InvalidInput("sequential_step: empty window");
  const auto start = Clock::now();
  const SampleSet& prev = window.back();
  const std::size_t M = prev.size();
  if (M < 2) throw InvalidInput("sequential_step: previous sample too small");
  const InputSet& inputs = model.inputs(step);
  for (const auto& w : window) {
    if (w.size() != M) throw InvalidInput("sequential_step: window sample sizes differ");
    if (w.inputs.dim() != inputs.dim() || w.inputs.size() != w.states[0].f.size()) {
      throw InvalidInput("sequential_step: window inputs inconsistent with step inputs");
    }
  }

  // Refit q_{t-1}(kappa, alpha) by moment matching in z-space.
  const SsgSpec prior = cfg.hyper_prior();
  Eigen::MatrixXd z_rows(static_cast<Eigen::Index>(M), prior.dim());
  for (std::size_t i = 0; i < M; ++i) {
    Eigen::VectorXd theta(prior.dim());
    theta << prev.states[i].kappa, prev.states[i].alpha;
    z_rows.row(static_cast<Eigen::Index>(i)) = ssg_inverse_clipped(theta, prior).transpose();
  }
  auto [m_z, K_z] = moment_match(z_rows);

  Chain chain(cfg, rng, prior.with_gaussian(m_z, K_z));
  chain.loglik = [&](const Eigen::VectorXd& f, const Eigen::VectorXd& a) {
    return safe_loglik(model, step, f, a);
  };
  chain.set_hyper(prev.states.back().kappa, prev.states.back().alpha);

  std::vector<LatentBlock> blocks(window.size());
  chain.prior = [&blocks, &inputs](const KernelParams& k) {
    return conditional_prior(blocks, inputs, k);
  };

  SampleSet out;
  out.t = step + 1;
  out.inputs = inputs;
  out.states.reserve(M);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t w = 0; w < window.size(); ++w) {
      blocks[w].values = window[w].states[i].f;
      blocks[w].inputs = window[w].inputs;
    }
    chain.draw_latent();
    chain.update_latent(cfg.ess_reps);
    chain.update_kappa(cfg.sdss_every_step);
    chain.update_latent(cfg.ess_reps);
    chain.update_alpha();
    chain.update_latent(cfg.ess_reps);
    out.states.push_back(chain.snapshot());
  }
  fill_diag(diag, out, seconds_since(start), chain.proposals);
  return out;
}

SequenceResult run_sequence(const LikelihoodModel& model, const RunConfig& cfg, RngStream& rng) {
  cfg.validate();
  const std::size_t T = std::min(cfg.t_steps, model.num_steps());
  if (T < 1) throw InvalidInput("run_sequence: no steps");
  SequenceResult res;
  res.sets.reserve(T);
  StepDiagnostics d;
  res.sets.push_back(initial_sample(model, 0, cfg, rng, &d));
  res.diagnostics.push_back(d);
  for (std::size_t t = 1; t < T; ++t) {
    const std::size_t first = t >= cfg.tau ? t - cfg.tau : 0;
    std::span<const SampleSet> window(res.sets.data() + first, t - first);
    auto set = sequential_step(window, model, t, cfg, rng, &d);
    res.sets.push_back(std::move(set));
    res.diagnostics.push_back(d);
  }
  return res;
}

SequenceResult full_gibbs_baseline(const LikelihoodModel& model, const RunConfig& cfg,
                                   RngStream& rng, bool override_guard) {
  cfg.validate();
  const std::size_t T = std::min(cfg.t_steps, model.num_steps());
  if (T < 1) throw InvalidInput("full_gibbs_baseline: no steps");
  std::size_t total = 0;
  for (std::size_t t = 0; t < T; ++t) total += static_cast<std::size_t>(model.inputs(t).size());
  if (total > cfg.full_size_guard && !override_guard) {
    throw InvalidInput("full_gibbs_baseline: t*N = " + std::to_string(total) +
                       " exceeds the guard of " + std::to_string(cfg.full_size_guard) +
                       "; the exact joint posterior costs O(t^3 N^3) per update");
  }

  SequenceResult res;
  std::vector<const InputSet*> parts;
  std::vector<Eigen::Index> offsets{0};
  Eigen::VectorXd last_f;
  Eigen::VectorXd last_kappa, last_alpha;

  for (std::size_t t = 0; t < T; ++t) {
    const auto start = Clock::now();
    parts.push_back(&model.inputs(t));
    offsets.push_back(offsets.back() + model.inputs(t).size());
    const InputSet stacked = InputSet::concat(parts);
    const std::size_t n_blocks = t + 1;

    Chain chain(cfg, rng, cfg.hyper_prior());
    chain.prior = [&stacked](const KernelParams& k) { return conditional_prior({}, stacked, k); };
    chain.loglik = [&](const Eigen::VectorXd& f, const Eigen::VectorXd& a) {
      double total_ll = 0.0;
      for (std::size_t s = 0; s < n_blocks; ++s) {
        const auto off = offsets[s];
        const auto len = offsets[s + 1] - off;
        total_ll += safe_loglik(model, s, f.segment(off, len), a);
        if (total_ll == kNegInf) break;
      }
      return total_ll;
    };

    if (t == 0) {
      const Eigen::VectorXd theta0 = ssg_forward(chain.q.mean_z(), chain.q);
      chain.set_hyper(theta0.head(cfg.kappa_dim()), theta0.tail(cfg.alpha_dim()));
      chain.draw_latent();
    } else {
      // Warm start: previous joint state, new block from its conditional prior.
      chain.set_hyper(last_kappa, last_alpha);
      chain.refresh_prior();
      const auto kappa = KernelParams::from_vector(chain.kappa);
      const LatentBlock past{last_f, InputSet::concat(std::span(parts.data(), t))};
      const auto cond_new = conditional_prior(std::span(&past, 1), model.inputs(t), kappa);
      chain.f.resize(offsets.back());
      chain.f.head(offsets[t]) = last_f;
      chain.f.tail(offsets[t + 1] - offsets[t]) =
          prior_draw(cond_new, rng.normal_vector(cond_new.size()));
      chain.ll = chain.loglik_f(chain.f);
      if (chain.ll == kNegInf) chain.draw_latent();
    }

    auto kept = run_exact_chain(chain, cfg);
    last_f = chain.f;
    last_kappa = chain.kappa;
    last_alpha = chain.alpha;

    SampleSet set;
    set.t = t + 1;
    set.inputs = model.inputs(t);
    const auto off = offsets[t];
    const auto len = offsets[t + 1] - off;
    for (auto& s : kept) {
      Eigen::VectorXd block = s.f.segment(off, len);
      s.f = std::move(block);
    }
    set.states = std::move(kept);
    StepDiagnostics d;
    fill_diag(&d, set, seconds_since(start), chain.proposals);
    res.sets.push_back(std::move(set));
    res.diagnostics.push_back(d);
  }
  return res;
}

}  // namespace seqgp
