#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "seqgp/rng.hpp"

namespace seqgp {

/// log(1 + exp(f)), overflow-safe.
double softplus(double f);

/// Local volatility on a maturity x strike node grid.
/// sigma(m, k) belongs to (maturities[m], strikes[k]).
struct VolSurface {
  Eigen::VectorXd maturities;
  Eigen::VectorXd strikes;
  Eigen::MatrixXd sigma;

  /// sigma = softplus(f + mu_f); f ordered strike-major (k * n_maturities + m).
  static VolSurface from_latent(Eigen::VectorXd maturities, Eigen::VectorXd strikes,
                                const Eigen::VectorXd& f, double mu_f);

  void validate() const;
};

/// Uniform Crank-Nicolson grid: strikes j * dk for j = 0..n_k, maturities
/// n * dt for n = 0..n_t.
struct PdeGrid {
  double spot = 1000.0;
  double rate = 0.0;
  double k_max = 2000.0;
  int n_k = 200;
  double t_max = 1.0;
  int n_t = 200;

  static constexpr int kMinStrikeNodes = 50;

  double dk() const noexcept { return k_max / n_k; }
  double dt() const noexcept { return t_max / n_t; }

  /// Grid on [0, >= 2 * max_strike] with the spot on a node and about
  /// `n_k` strike intervals.
  static PdeGrid for_quotes(double spot, double max_strike, double max_maturity, int n_k,
                            int n_t, double rate = 0.0);

  void validate() const;
};

struct Quote {
  double maturity = 0.0;
  double strike = 0.0;
};

/// Bilinear inside the surface's node hull, nearest-edge outside.
/// Result is (n_t + 1) x (n_k + 1), row n = maturity n * dt.
Eigen::MatrixXd interpolate_surface(const VolSurface& surface, const PdeGrid& grid);

/// Forward (Dupire) call-price PDE solved from the payoff (S - K)^+ with
/// Crank-Nicolson in maturity, Rannacher start-up and central differences
/// in strike. Returns bilinear prices at the quotes.
Eigen::VectorXd crank_nicolson_price(const Eigen::MatrixXd& sigma_grid, const PdeGrid& grid,
                                     std::span<const Quote> quotes);

/// Same prices with sigma read from the surface one maturity level at a
/// time, so the interpolated grid is never stored.
Eigen::VectorXd crank_nicolson_price(const VolSurface& surface, const PdeGrid& grid,
                                     std::span<const Quote> quotes);

/// Full (n_t + 1) x (n_k + 1) solution array.
Eigen::MatrixXd crank_nicolson_solve(const Eigen::MatrixXd& sigma_grid, const PdeGrid& grid);

/// Tridiagonal solve (Thomas). sub[0] and super[n-1] are ignored.
/// Throws NumericalError on a vanishing pivot.
void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                       std::span<const double> super, std::span<double> rhs,
                       std::span<double> scratch);

/// S_{t+1} = S_t exp((mu - sigma^2/2) dt + sigma sqrt(dt) z); path length t_steps.
Eigen::VectorXd gbm_simulate(double s1, double mu, double sigma, std::size_t t_steps,
                             double dt, RngStream& rng);

}  // namespace seqgp
