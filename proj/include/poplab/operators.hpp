#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "poplab/grid.hpp"

namespace poplab {

// Implicit step for the -K*Laplace term: solves (I + dt*K*L_h) u_new = u_old,
// with L_h the second-difference operator under homogeneous Dirichlet ends.
// The matrix is constant tridiagonal SPD; the Thomas factorization is
// precomputed once and reused across rows and time steps.
class DiffusionOp {
 public:
  DiffusionOp() = default;
  DiffusionOp(int nx, double K, double dt, double dx) : nx_(nx) {
    if (nx < 1) throw std::invalid_argument("DiffusionOp: nx >= 1");
    alpha_ = K * dt / (dx * dx);
    const double d = 1.0 + 2.0 * alpha_;
    const double e = -alpha_;
    cp_.assign(nx, 0.0);
    inv_diag_.assign(nx, 0.0);
    double denom = d;
    inv_diag_[0] = 1.0 / denom;
    cp_[0] = e / denom;
    for (int i = 1; i < nx; ++i) {
      denom = d - e * cp_[i - 1];
      inv_diag_[i] = 1.0 / denom;
      if (i < nx - 1) cp_[i] = e / denom;
    }
    off_ = e;
  }

  static DiffusionOp for_grid(const Grid& g, double K) { return {g.nx, K, g.dt(), g.dx()}; }

  bool identity() const { return alpha_ == 0.0; }

  void apply_inplace(std::span<double> u) const {
    if (identity()) return;
    // forward sweep
    u[0] *= inv_diag_[0];
    for (int i = 1; i < nx_; ++i) u[i] = (u[i] - off_ * u[i - 1]) * inv_diag_[i];
    // back substitution
    for (int i = nx_ - 2; i >= 0; --i) u[i] -= cp_[i] * u[i + 1];
  }

  std::vector<double> apply(std::span<const double> u) const {
    std::vector<double> r(u.begin(), u.end());
    apply_inplace(r);
    return r;
  }

  // Closed-form amplification of the discrete eigenmode sin(k*pi*x_j).
  double eigen_factor(int k, double dx) const {
    const double s = std::sin(0.5 * k * std::numbers::pi * dx);
    return 1.0 / (1.0 + 4.0 * alpha_ * s * s);
  }

 private:
  int nx_ = 0;
  double alpha_ = 0.0;
  double off_ = 0.0;
  std::vector<double> cp_;
  std::vector<double> inv_diag_;
};

inline std::vector<double> diffusion_step(std::span<const double> profile, double K, double dt, double dx) {
  DiffusionOp op(static_cast<int>(profile.size()), K, dt, dx);
  return op.apply(profile);
}

// Composite trapezoid weights over the age grid; exposed so the adjoint can
// transpose the renewal quadrature exactly.
inline std::vector<double> trapezoid_weights(const Grid& g) {
  std::vector<double> w(g.na + 1, g.da());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

// Trapezoid quadrature of field against an age weight, per spatial node.
template <typename WeightFn>
std::vector<double> age_integral(const Field& field, const Grid& g, WeightFn&& weight) {
  const std::vector<double> w = trapezoid_weights(g);
  std::vector<double> out(g.nx, 0.0);
  for (int i = 0; i <= g.na; ++i) {
    const double c = w[i] * weight(g.age(i));
    if (c == 0.0) continue;
    const auto row = field.row(i);
    for (int j = 0; j < g.nx; ++j) out[j] += c * row[j];
  }
  return out;
}

// Heat semigroup exp(t*K*Laplace_h) on the discrete sine basis, with exact
// exponentials of the second-difference eigenvalues. Independent time
// propagation path used by the characteristic oracle.
class SpectralHeat {
 public:
  SpectralHeat(int nx, double dx) : nx_(nx), dx_(dx) {
    basis_.assign(static_cast<size_t>(nx) * nx, 0.0);
    lambda_.assign(nx, 0.0);
    for (int k = 1; k <= nx; ++k) {
      const double s = std::sin(0.5 * k * std::numbers::pi * dx);
      lambda_[k - 1] = 4.0 / (dx * dx) * s * s;
      for (int j = 0; j < nx; ++j)
        basis_[static_cast<size_t>(k - 1) * nx + j] = std::sin(k * std::numbers::pi * (j + 1) * dx);
    }
  }

  explicit SpectralHeat(const Grid& g) : SpectralHeat(g.nx, g.dx()) {}

  std::vector<double> propagate(std::span<const double> u, double K, double tau) const {
    std::vector<double> coef(nx_, 0.0);
    for (int k = 0; k < nx_; ++k) {
      double c = 0.0;
      for (int j = 0; j < nx_; ++j) c += basis_[static_cast<size_t>(k) * nx_ + j] * u[j];
      coef[k] = c * 2.0 * dx_ * std::exp(-K * lambda_[k] * tau);
    }
    std::vector<double> out(nx_, 0.0);
    for (int j = 0; j < nx_; ++j) {
      double s = 0.0;
      for (int k = 0; k < nx_; ++k) s += basis_[static_cast<size_t>(k) * nx_ + j] * coef[k];
      out[j] = s;
    }
    return out;
  }

 private:
  int nx_;
  double dx_;
  std::vector<double> basis_;
  std::vector<double> lambda_;
};

}  // namespace poplab
