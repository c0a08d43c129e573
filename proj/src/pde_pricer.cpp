#include "seqgp/pde_pricer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "seqgp/error.hpp"

namespace seqgp {

namespace {

struct LinearWeight {
  Eigen::Index lo = 0;
  double w = 0.0;  // weight on lo + 1
};

// Clamped linear interpolation weight on an increasing axis.
LinearWeight locate(const Eigen::VectorXd& axis, double x) {
  const auto n = axis.size();
  if (n == 1 || x <= axis[0]) return {0, 0.0};
  if (x >= axis[n - 1]) return {n - 2, 1.0};
  const auto* it = std::upper_bound(axis.data(), axis.data() + n, x);
  const auto hi = static_cast<Eigen::Index>(it - axis.data());
  const auto lo = hi - 1;
  return {lo, (x - axis[lo]) / (axis[hi] - axis[lo])};
}

double lerp(double a, double b, double w) { return w == 0.0 ? a : (w == 1.0 ? b : (1.0 - w) * a + w * b); }

void check_axis(const Eigen::VectorXd& axis, const char* what) {
  if (axis.size() == 0) throw InvalidInput(std::string(what) + ": empty axis");
  for (Eigen::Index i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) {
      throw InvalidInput(std::string(what) + ": axis must be strictly increasing");
    }
  }
}

// Coefficients of the strike operator
// (L C)_j = lower_j C_{j-1} + diag_j C_j + upper_j C_{j+1}, interior j = 1..n_k-1.
struct StrikeOperator {
  std::vector<double> lower, diag, upper;

  void assemble(const PdeGrid& grid, const double* sigma_row_a, const double* sigma_row_b) {
    const int m = grid.n_k - 1;
    lower.resize(m);
    diag.resize(m);
    upper.resize(m);
    const double dk = grid.dk();
    for (int i = 0; i < m; ++i) {
      const int j = i + 1;
      const double s = 0.5 * (sigma_row_a[j] + sigma_row_b[j]);
      const double kk = j * dk;
      const double diffusion = 0.5 * s * s * kk * kk / (dk * dk);
      const double drift = grid.rate * kk / (2.0 * dk);
      lower[i] = diffusion + drift;
      diag[i] = -2.0 * diffusion;
      upper[i] = diffusion - drift;
    }
  }
};

}  // namespace

double softplus(double f) {
  if (f > 0.0) return f + std::log1p(std::exp(-f));
  return std::log1p(std::exp(f));
}

VolSurface VolSurface::from_latent(Eigen::VectorXd maturities, Eigen::VectorXd strikes,
                                   const Eigen::VectorXd& f, double mu_f) {
  const auto n_m = maturities.size();
  const auto n_k = strikes.size();
  if (f.size() != n_m * n_k) throw InvalidInput("VolSurface: latent length != grid size");
  VolSurface s{std::move(maturities), std::move(strikes), Eigen::MatrixXd(n_m, n_k)};
  for (Eigen::Index k = 0; k < n_k; ++k) {
    for (Eigen::Index m = 0; m < n_m; ++m) s.sigma(m, k) = softplus(f[k * n_m + m] + mu_f);
  }
  return s;
}

void VolSurface::validate() const {
  check_axis(maturities, "VolSurface maturities");
  check_axis(strikes, "VolSurface strikes");
  if (sigma.rows() != maturities.size() || sigma.cols() != strikes.size()) {
    throw InvalidInput("VolSurface: sigma shape does not match axes");
  }
  if (!sigma.allFinite() || (sigma.array() <= 0.0).any()) {
    throw InvalidInput("VolSurface: sigma must be finite and positive");
  }
}

PdeGrid PdeGrid::for_quotes(double spot, double max_strike, double max_maturity, int n_k,
                            int n_t, double rate) {
  if (!(spot > 0.0) || !(max_strike > 0.0) || !(max_maturity > 0.0) || n_t < 1) {
    throw InvalidInput("PdeGrid::for_quotes: invalid arguments");
  }
  n_k = std::max(n_k, kMinStrikeNodes);
  const double k_target = 2.0 * max_strike;
  const double dk0 = k_target / n_k;
  const double spot_nodes = std::max(1.0, std::round(spot / dk0));
  const double dk = spot / spot_nodes;
  int nodes = static_cast<int>(std::ceil(k_target / dk - 1e-9));
  nodes = std::max({nodes, static_cast<int>(spot_nodes) + 1, kMinStrikeNodes});
  PdeGrid g;
  g.spot = spot;
  g.rate = rate;
  g.n_k = nodes;
  g.k_max = nodes * dk;
  g.t_max = max_maturity;
  g.n_t = n_t;
  return g;
}

void PdeGrid::validate() const {
  if (n_k < kMinStrikeNodes || n_t < 1 || !(k_max > spot) || !(spot > 0.0) ||
      !(t_max > 0.0) || !std::isfinite(rate)) {
    throw InvalidInput("PdeGrid: invalid discretization");
  }
}

namespace {

// Surface interpolated onto the PDE strike nodes, one row per surface maturity.
Eigen::MatrixXd strike_nodes(const VolSurface& surface, const PdeGrid& grid) {
  const auto n_m = surface.maturities.size();
  const int nk = grid.n_k;
  Eigen::MatrixXd by_strike(n_m, nk + 1);
  for (int j = 0; j <= nk; ++j) {
    const auto lw = locate(surface.strikes, j * grid.dk());
    const auto hi = std::min<Eigen::Index>(lw.lo + 1, surface.strikes.size() - 1);
    for (Eigen::Index m = 0; m < n_m; ++m) {
      by_strike(m, j) = lerp(surface.sigma(m, lw.lo), surface.sigma(m, hi), lw.w);
    }
  }
  return by_strike;
}

// Row n (maturity n * dt) of the bilinear surface.
void maturity_row(const Eigen::MatrixXd& by_strike, const Eigen::VectorXd& maturities,
                  const PdeGrid& grid, int n, double* out) {
  const auto lw = locate(maturities, n * grid.dt());
  const auto hi = std::min<Eigen::Index>(lw.lo + 1, maturities.size() - 1);
  for (int j = 0; j <= grid.n_k; ++j) out[j] = lerp(by_strike(lw.lo, j), by_strike(hi, j), lw.w);
}

}  // namespace

Eigen::MatrixXd interpolate_surface(const VolSurface& surface, const PdeGrid& grid) {
  surface.validate();
  grid.validate();
  // Strike direction first, then maturity; bilinear because the grid is a
  // tensor product.
  const Eigen::MatrixXd by_strike = strike_nodes(surface, grid);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(grid.n_t + 1,
                                                                             grid.n_k + 1);
  for (int n = 0; n <= grid.n_t; ++n) {
    maturity_row(by_strike, surface.maturities, grid, n, out.row(n).data());
  }
  return out;
}

void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                       std::span<const double> super, std::span<double> rhs,
                       std::span<double> scratch) {
  const std::size_t n = diag.size();
  if (n == 0) return;
  double pivot = diag[0];
  if (pivot == 0.0 || !std::isfinite(pivot)) throw NumericalError("tridiagonal solve: zero pivot");
  rhs[0] /= pivot;
  for (std::size_t i = 1; i < n; ++i) {
    scratch[i] = super[i - 1] / pivot;
    pivot = diag[i] - sub[i] * scratch[i];
    if (pivot == 0.0 || !std::isfinite(pivot)) {
      throw NumericalError("tridiagonal solve: zero pivot at row " + std::to_string(i));
    }
    rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i + 1] * rhs[i + 1];
}

namespace {

void check_sigma_row(const double* row, int n) {
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(row[j]) || !(row[j] > 0.0)) {
      throw InvalidInput("crank_nicolson: sigma must be finite and positive");
    }
  }
}

// Marches the PDE from the payoff, keeping only two maturity levels.
// fill_sigma(n, out) writes sigma at maturity level n; on_level(n, values)
// sees the solution at every level n = 0..n_t.
template <class FillSigma, class OnLevel>
void crank_nicolson_march(const PdeGrid& grid, FillSigma&& fill_sigma, OnLevel&& on_level) {
  const int nk = grid.n_k;
  const int nt = grid.n_t;
  const double dk = grid.dk();
  const double S = grid.spot;
  std::vector<double> u_old(nk + 1), u_new(nk + 1), half(nk + 1), sig_a(nk + 1), sig_b(nk + 1);
  for (int j = 0; j <= nk; ++j) u_old[j] = std::max(S - j * dk, 0.0);
  on_level(0, u_old.data());

  const int m = nk - 1;
  StrikeOperator op_old, op_new;
  std::vector<double> sub(m), dia(m), sup(m), rhs(m), scratch(m);

  // One theta-scheme step of size h from values u_prev to u_next.
  // theta = 1 is backward Euler, theta = 1/2 Crank-Nicolson.
  auto step = [&](const double* u_prev, double* u_next, double h, double theta,
                  const StrikeOperator& old_op, const StrikeOperator& new_op) {
    for (int i = 0; i < m; ++i) {
      const int j = i + 1;
      double explicit_part = 0.0;
      if (theta < 1.0) {
        explicit_part = old_op.lower[i] * u_prev[j - 1] + old_op.diag[i] * u_prev[j] +
                        old_op.upper[i] * u_prev[j + 1];
      }
      rhs[i] = u_prev[j] + h * (1.0 - theta) * explicit_part;
      sub[i] = -h * theta * new_op.lower[i];
      dia[i] = 1.0 - h * theta * new_op.diag[i];
      sup[i] = -h * theta * new_op.upper[i];
    }
    // Dirichlet boundaries: C(T, 0) = S, C(T, k_max) = 0.
    rhs[0] += h * theta * new_op.lower[0] * S;
    solve_tridiagonal(sub, dia, sup, rhs, scratch);
    u_next[0] = S;
    u_next[nk] = 0.0;
    for (int i = 0; i < m; ++i) u_next[i + 1] = rhs[i];
  };

  const double dt = grid.dt();
  fill_sigma(0, sig_a.data());
  check_sigma_row(sig_a.data(), nk + 1);
  fill_sigma(1, sig_b.data());
  check_sigma_row(sig_b.data(), nk + 1);
  // Rannacher start-up: two backward-Euler half steps damp the payoff kink.
  op_new.assemble(grid, sig_a.data(), sig_b.data());
  step(u_old.data(), half.data(), 0.5 * dt, 1.0, op_new, op_new);
  op_new.assemble(grid, sig_b.data(), sig_b.data());
  step(half.data(), u_new.data(), 0.5 * dt, 1.0, op_new, op_new);
  on_level(1, u_new.data());
  std::swap(u_old, u_new);
  op_old = op_new;
  for (int n = 1; n < nt; ++n) {
    fill_sigma(n + 1, sig_a.data());
    check_sigma_row(sig_a.data(), nk + 1);
    op_new.assemble(grid, sig_a.data(), sig_a.data());
    step(u_old.data(), u_new.data(), dt, 0.5, op_old, op_new);
    on_level(n + 1, u_new.data());
    std::swap(u_old, u_new);
    std::swap(op_old, op_new);
  }
}

// Bilinear read-out of quote prices from the levels as they are produced.
class QuoteTaps {
 public:
  QuoteTaps(const PdeGrid& grid, std::span<const Quote> quotes) : taps_(quotes.size()) {
    const double dk = grid.dk();
    const double dt = grid.dt();
    const double tol = 1e-9;
    for (std::size_t q = 0; q < quotes.size(); ++q) {
      const double T = quotes[q].maturity;
      const double K = quotes[q].strike;
      if (T < 0.0 || T > grid.t_max * (1.0 + tol) || K < 0.0 || K > grid.k_max * (1.0 + tol)) {
        throw InvalidInput("crank_nicolson_price: quote outside the PDE grid");
      }
      const double xt = std::min(T / dt, static_cast<double>(grid.n_t));
      const double xk = std::min(K / dk, static_cast<double>(grid.n_k));
      Tap& tap = taps_[q];
      tap.n0 = std::min(static_cast<int>(xt), grid.n_t - 1);
      tap.j0 = std::min(static_cast<int>(xk), grid.n_k - 1);
      tap.wt = xt - tap.n0;
      tap.wk = xk - tap.j0;
    }
  }

  void operator()(int n, const double* level) {
    for (auto& tap : taps_) {
      if (tap.n0 == n) tap.lo = lerp(level[tap.j0], level[tap.j0 + 1], tap.wk);
      if (tap.n0 + 1 == n) tap.hi = lerp(level[tap.j0], level[tap.j0 + 1], tap.wk);
    }
  }

  Eigen::VectorXd prices() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(taps_.size()));
    for (std::size_t q = 0; q < taps_.size(); ++q) {
      out[static_cast<Eigen::Index>(q)] = lerp(taps_[q].lo, taps_[q].hi, taps_[q].wt);
    }
    return out;
  }

 private:
  struct Tap {
    int n0 = 0, j0 = 0;
    double wt = 0.0, wk = 0.0, lo = 0.0, hi = 0.0;
  };
  std::vector<Tap> taps_;
};

void check_sigma_shape(const Eigen::MatrixXd& sigma_grid, const PdeGrid& grid) {
  grid.validate();
  if (sigma_grid.rows() != grid.n_t + 1 || sigma_grid.cols() != grid.n_k + 1) {
    throw InvalidInput("crank_nicolson: sigma grid shape does not match the PDE grid");
  }
}

}  // namespace

Eigen::MatrixXd crank_nicolson_solve(const Eigen::MatrixXd& sigma_grid, const PdeGrid& grid) {
  check_sigma_shape(sigma_grid, grid);
  Eigen::MatrixXd C(grid.n_t + 1, grid.n_k + 1);
  crank_nicolson_march(
      grid, [&](int n, double* out) { Eigen::Map<Eigen::RowVectorXd>(out, grid.n_k + 1) = sigma_grid.row(n); },
      [&](int n, const double* level) { C.row(n) = Eigen::Map<const Eigen::RowVectorXd>(level, grid.n_k + 1); });
  return C;
}

Eigen::VectorXd crank_nicolson_price(const Eigen::MatrixXd& sigma_grid, const PdeGrid& grid,
                                     std::span<const Quote> quotes) {
  check_sigma_shape(sigma_grid, grid);
  QuoteTaps taps(grid, quotes);
  crank_nicolson_march(
      grid, [&](int n, double* out) { Eigen::Map<Eigen::RowVectorXd>(out, grid.n_k + 1) = sigma_grid.row(n); },
      taps);
  return taps.prices();
}

Eigen::VectorXd crank_nicolson_price(const VolSurface& surface, const PdeGrid& grid,
                                     std::span<const Quote> quotes) {
  surface.validate();
  grid.validate();
  QuoteTaps taps(grid, quotes);
  const Eigen::MatrixXd by_strike = strike_nodes(surface, grid);
  crank_nicolson_march(
      grid, [&](int n, double* out) { maturity_row(by_strike, surface.maturities, grid, n, out); },
      taps);
  return taps.prices();
}

Eigen::VectorXd gbm_simulate(double s1, double mu, double sigma, std::size_t t_steps, double dt,
                             RngStream& rng) {
  if (!(s1 > 0.0)) throw InvalidInput("gbm_simulate: S_1 must be positive");
  if (sigma < 0.0 || !(dt > 0.0)) throw InvalidInput("gbm_simulate: need sigma >= 0, dt > 0");
  Eigen::VectorXd path(static_cast<Eigen::Index>(t_steps));
  if (t_steps == 0) return path;
  path[0] = s1;
  const double drift = (mu - 0.5 * sigma * sigma) * dt;
  const double vol = sigma * std::sqrt(dt);
  for (Eigen::Index t = 1; t < path.size(); ++t) {
    path[t] = path[t - 1] * std::exp(drift + vol * rng.normal());
  }
  return path;
}

}  // namespace seqgp
