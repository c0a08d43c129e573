#include "seqgp/gp_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

#include "seqgp/error.hpp"

namespace seqgp {

namespace {

// exp(-690) ~ 1e-300; anything smaller is reported as exactly zero.
constexpr double kMinExponent = -690.0;

void check_kernel_dims(Eigen::Index dim, const KernelParams& kappa) {
  if (dim != kappa.dim()) {
    throw InvalidInput("input dimension " + std::to_string(dim) +
                       " does not match kernel dimension " +
                       std::to_string(kappa.dim()));
  }
}

bool try_llt(const Eigen::MatrixXd& K, double jitter, Eigen::MatrixXd& out) {
  Eigen::MatrixXd A = K;
  if (jitter > 0.0) A.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  return out.diagonal().allFinite() && (out.diagonal().array() > 0.0).all();
}

JitterSchedule gp_schedule(double scale) { return {scale, -1.0}; }

}  // namespace

InputSet::InputSet(Eigen::VectorXd t_coords, Eigen::MatrixXd x_coords)
    : t(std::move(t_coords)), x(std::move(x_coords)) {
  if (t.size() != x.rows()) {
    throw InvalidInput("InputSet: t and x row counts differ");
  }
}

InputSet::InputSet(std::span<const InputPoint> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const Eigen::Index d = n > 0 ? points[0].x.size() : 0;
  t.resize(n);
  x.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (points[i].x.size() != d) throw InvalidInput("InputSet: mixed input dimensions");
    t[i] = points[i].t;
    x.row(i) = points[i].x.transpose();
  }
}

InputPoint InputSet::point(Eigen::Index i) const { return {t[i], x.row(i).transpose()}; }

InputSet InputSet::subset(std::span<const Eigen::Index> index) const {
  InputSet out;
  out.t.resize(static_cast<Eigen::Index>(index.size()));
  out.x.resize(static_cast<Eigen::Index>(index.size()), dim());
  for (std::size_t k = 0; k < index.size(); ++k) {
    const auto i = index[k];
    if (i < 0 || i >= size()) throw InvalidInput("InputSet::subset: index out of range");
    out.t[static_cast<Eigen::Index>(k)] = t[i];
    out.x.row(static_cast<Eigen::Index>(k)) = x.row(i);
  }
  return out;
}

InputSet InputSet::concat(std::span<const InputSet* const> parts) {
  Eigen::Index n = 0;
  Eigen::Index d = -1;
  for (const auto* p : parts) {
    if (p->empty()) continue;
    if (d >= 0 && p->dim() != d) throw InvalidInput("InputSet::concat: mixed dimensions");
    d = p->dim();
    n += p->size();
  }
  InputSet out;
  out.t.resize(n);
  out.x.resize(n, d < 0 ? 0 : d);
  Eigen::Index row = 0;
  for (const auto* p : parts) {
    if (p->empty()) continue;
    out.t.segment(row, p->size()) = p->t;
    out.x.middleRows(row, p->size()) = p->x;
    row += p->size();
  }
  return out;
}

KernelParams::KernelParams(Eigen::VectorXd lengthscales_x, double lengthscale_t,
                           double signal_sd)
    : lengthscales_x_(std::move(lengthscales_x)),
      lengthscale_t_(lengthscale_t),
      signal_sd_(signal_sd) {
  const bool ok = lengthscales_x_.allFinite() && (lengthscales_x_.array() > 0.0).all() &&
                  std::isfinite(lengthscale_t_) && lengthscale_t_ > 0.0 &&
                  std::isfinite(signal_sd_) && signal_sd_ > 0.0;
  if (!ok) throw InvalidInput("KernelParams: entries must be finite and positive");
}

KernelParams KernelParams::from_vector(const Eigen::VectorXd& kappa) {
  if (kappa.size() < 2) throw InvalidInput("KernelParams: need at least (l_t, sigma_f)");
  const Eigen::Index d = kappa.size() - 2;
  return KernelParams(kappa.head(d), kappa[d], kappa[d + 1]);
}

Eigen::VectorXd KernelParams::to_vector() const {
  Eigen::VectorXd v(dim() + 2);
  v.head(dim()) = lengthscales_x_;
  v[dim()] = lengthscale_t_;
  v[dim() + 1] = signal_sd_;
  return v;
}

double kernel_eval(const InputPoint& p, const InputPoint& q, const KernelParams& kappa) {
  if (p.x.size() != q.x.size()) throw InvalidInput("kernel_eval: point dimensions differ");
  check_kernel_dims(p.x.size(), kappa);
  const double dt = (p.t - q.t) / kappa.lengthscale_t();
  double expo = -0.5 * dt * dt;
  for (Eigen::Index d = 0; d < kappa.dim(); ++d) {
    const double dx = (p.x[d] - q.x[d]) / kappa.lengthscales_x()[d];
    expo -= 0.5 * dx * dx;
  }
  if (expo < kMinExponent) return 0.0;
  return kappa.signal_var() * std::exp(expo);
}

Eigen::MatrixXd cross_covariance(const InputSet& a, const InputSet& b,
                                 const KernelParams& kappa) {
  if (a.empty() || b.empty()) return Eigen::MatrixXd(a.size(), b.size());
  check_kernel_dims(a.dim(), kappa);
  check_kernel_dims(b.dim(), kappa);

  // Scale once so the inner loop is a plain squared distance.
  const Eigen::RowVectorXd inv_l = kappa.lengthscales_x().cwiseInverse().transpose();
  const Eigen::MatrixXd xa = a.x.array().rowwise() * inv_l.array();
  const Eigen::MatrixXd xb = b.x.array().rowwise() * inv_l.array();
  const Eigen::VectorXd ta = a.t / kappa.lengthscale_t();
  const Eigen::VectorXd tb = b.t / kappa.lengthscale_t();
  const double var = kappa.signal_var();

  Eigen::MatrixXd K(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double dt = ta[i] - tb[j];
      double sq = dt * dt;
      for (Eigen::Index d = 0; d < xa.cols(); ++d) {
        const double dx = xa(i, d) - xb(j, d);
        sq += dx * dx;
      }
      const double expo = -0.5 * sq;
      K(i, j) = expo < kMinExponent ? 0.0 : var * std::exp(expo);
    }
  }
  return K;
}

Eigen::MatrixXd gram_matrix(const InputSet& points, const KernelParams& kappa,
                            double jitter) {
  if (points.empty()) throw InvalidInput("gram_matrix: need at least one point");
  if (!(jitter >= 0.0)) throw InvalidInput("gram_matrix: jitter must be non-negative");
  Eigen::MatrixXd K = cross_covariance(points, points, kappa);
  // Exact symmetry regardless of rounding in the scaled distances.
  K = 0.5 * (K + K.transpose()).eval();
  K.diagonal().array() += jitter;
  return K;
}

CholeskyFactor chol_decompose(const Eigen::MatrixXd& K, JitterSchedule schedule) {
  if (K.rows() != K.cols()) throw InvalidInput("chol_decompose: matrix is not square");
  if (!K.allFinite()) throw InvalidInput("chol_decompose: non-finite entries");
  if (!(schedule.scale > 0.0) || !std::isfinite(schedule.scale)) {
    throw InvalidInput("chol_decompose: jitter scale must be positive");
  }
  CholeskyFactor out;
  if (schedule.start >= 0.0 && try_llt(K, schedule.start, out.lower)) {
    out.jitter_used = schedule.start;
    return out;
  }
  double jitter = JitterSchedule::kFirst * schedule.scale;
  const double last = JitterSchedule::kLast * schedule.scale * (1.0 + 1e-9);
  for (; jitter <= last; jitter *= 10.0) {
    if (try_llt(K, jitter, out.lower)) {
      out.jitter_used = jitter;
      return out;
    }
  }
  throw DecompositionFailure("chol_decompose: matrix not positive definite after jitter " +
                                 std::to_string(jitter / 10.0),
                             jitter / 10.0);
}

CholeskyFactor chol_decompose(const Eigen::MatrixXd& K) {
  double scale = K.rows() > 0 ? K.diagonal().cwiseAbs().mean() : 1.0;
  if (!(scale > 0.0)) scale = 1.0;
  return chol_decompose(K, JitterSchedule{scale, 0.0});
}

GpConditional make_gaussian(Eigen::VectorXd mean, const Eigen::MatrixXd& cov,
                            double jitter_scale) {
  GpConditional out;
  auto f = chol_decompose(cov, gp_schedule(jitter_scale));
  out.mean = std::move(mean);
  out.cov = cov;
  out.cov.diagonal().array() += f.jitter_used;
  out.chol = std::move(f.lower);
  out.jitter_used = f.jitter_used;
  return out;
}

GpConditional conditional_prior(std::span<const LatentBlock> window, const InputSet& query,
                                const KernelParams& kappa) {
  if (query.empty()) return {};
  const double scale = kappa.signal_var();
  Eigen::MatrixXd K_qq = gram_matrix(query, kappa);

  std::vector<const InputSet*> parts;
  Eigen::Index n_window = 0;
  for (const auto& block : window) {
    if (block.values.size() != block.inputs.size()) {
      throw InvalidInput("conditional_prior: window block values/inputs length mismatch");
    }
    if (!block.inputs.empty() && block.inputs.dim() != query.dim()) {
      throw InvalidInput("conditional_prior: window and query dimensions differ");
    }
    parts.push_back(&block.inputs);
    n_window += block.values.size();
  }
  if (n_window == 0) return make_gaussian(Eigen::VectorXd::Zero(query.size()), K_qq, scale);

  Eigen::VectorXd f_w(n_window);
  Eigen::Index row = 0;
  for (const auto& block : window) {
    f_w.segment(row, block.values.size()) = block.values;
    row += block.values.size();
  }
  const InputSet w_inputs = InputSet::concat(parts);
  const Eigen::MatrixXd K_ww = gram_matrix(w_inputs, kappa);
  const Eigen::MatrixXd K_wq = cross_covariance(w_inputs, query, kappa);
  // Exact first: jitter on the window only when its Gram is numerically
  // singular, or when cancellation leaves the conditional covariance
  // indefinite beyond the GP jitter policy.
  double window_jitter = 0.0;
  for (;;) {
    const auto L_w = chol_decompose(K_ww, JitterSchedule{scale, window_jitter});
    const auto tri = L_w.lower.triangularView<Eigen::Lower>();
    const Eigen::MatrixXd V = tri.solve(K_wq);
    const Eigen::VectorXd a = tri.solve(f_w);
    Eigen::MatrixXd C = K_qq - V.transpose() * V;
    C = 0.5 * (C + C.transpose()).eval();
    try {
      return make_gaussian(V.transpose() * a, C, scale);
    } catch (const DecompositionFailure&) {
      const double next = std::max(L_w.jitter_used * 10.0, JitterSchedule::kFirst * scale);
      if (next > JitterSchedule::kLast * scale * (1.0 + 1e-12)) throw;
      window_jitter = next;
    }
  }
}

Eigen::VectorXd prior_draw(const GpConditional& cond, const Eigen::VectorXd& nu) {
  if (nu.size() != cond.size()) throw InvalidInput("prior_draw: nu has the wrong length");
  return cond.chol.triangularView<Eigen::Lower>() * nu + cond.mean;
}

Eigen::VectorXd whiten(const GpConditional& cond, const Eigen::VectorXd& values) {
  if (values.size() != cond.size()) throw InvalidInput("whiten: length mismatch");
  return cond.chol.triangularView<Eigen::Lower>().solve(values - cond.mean);
}

double log_density(const GpConditional& cond, const Eigen::VectorXd& x) {
  const Eigen::VectorXd nu = whiten(cond, x);
  const double log_det = cond.chol.diagonal().array().log().sum();
  return -0.5 * nu.squaredNorm() - log_det -
         0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
}

}  // namespace seqgp
