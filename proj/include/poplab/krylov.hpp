#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace poplab::krylov {

using ApplyFn = std::function<std::vector<double>(const std::vector<double>&)>;

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Eigen-decomposition of a symmetric tridiagonal matrix by the implicit-shift
// QL algorithm. d holds the diagonal (overwritten with eigenvalues), e the
// subdiagonal in e[1..n-1]; z starts as the identity and accumulates the
// eigenvectors in its columns (row-major, z[k*n+j] = component k of vector j).
inline void tridiag_eigen(std::vector<double>& d, std::vector<double>& e, int n,
                          std::vector<double>& z) {
  if (n == 0) return;
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= 1e-15 * dd) break;
      }
      if (m != l) {
        if (iter++ == 64) throw std::runtime_error("tridiag_eigen: too many QL iterations");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        int i;
        for (i = m - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (int k = 0; k < n; ++k) {
            f = z[static_cast<size_t>(k) * n + i + 1];
            z[static_cast<size_t>(k) * n + i + 1] = s * z[static_cast<size_t>(k) * n + i] + c * f;
            z[static_cast<size_t>(k) * n + i] = c * z[static_cast<size_t>(k) * n + i] - s * f;
          }
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

// Spectral deflation preconditioner: M^{-1} = U diag(1/lam) U^T +
// (I - U U^T)/sigma with U the near-invariant subspace of the dominant
// eigenvalues. Leaves any exact zero pattern of the residual intact as long
// as the basis vectors share it.
struct Deflation {
  std::vector<std::vector<double>> U;  // orthonormal Ritz vectors
  std::vector<double> lam;             // Ritz values, all >= sigma
  double sigma = 1.0;

  bool empty() const { return U.empty(); }

  std::vector<double> apply(const std::vector<double>& r) const {
    std::vector<double> out(r.size());
    for (size_t i = 0; i < r.size(); ++i) out[i] = r[i] / sigma;
    for (size_t k = 0; k < U.size(); ++k) {
      const double c = dot(U[k], r) * (1.0 / lam[k] - 1.0 / sigma);
      for (size_t i = 0; i < r.size(); ++i) out[i] += c * U[k][i];
    }
    return out;
  }
};

// Lanczos with full (two-pass) reorthogonalization; keeps the Ritz pairs
// whose values exceed cutoff_rel times the largest. The caller supplies the
// start vector, which fixes both determinism and any constrained subspace.
inline Deflation lanczos_deflation(const ApplyFn& apply, std::vector<double> start, int steps,
                                   double cutoff_rel) {
  Deflation defl;
  const size_t dim = start.size();
  if (steps <= 0 || dim == 0) return defl;
  if (steps > static_cast<int>(dim)) steps = static_cast<int>(dim);

  const double n0 = std::sqrt(dot(start, start));
  if (n0 == 0.0) return defl;
  for (double& x : start) x /= n0;

  std::vector<std::vector<double>> V;
  std::vector<double> alpha, beta;
  V.push_back(std::move(start));
  double scale = 0.0;
  for (int j = 0; j < steps; ++j) {
    std::vector<double> w = apply(V[j]);
    const double a = dot(V[j], w);
    alpha.push_back(a);
    scale = std::max(scale, std::abs(a));
    for (size_t i = 0; i < dim; ++i) w[i] -= a * V[j][i];
    if (j > 0)
      for (size_t i = 0; i < dim; ++i) w[i] -= beta[j - 1] * V[j - 1][i];
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& v : V) {
        const double c = dot(v, w);
        for (size_t i = 0; i < dim; ++i) w[i] -= c * v[i];
      }
    const double b = std::sqrt(dot(w, w));
    if (b <= 1e-13 * std::max(scale, 1.0) || j + 1 == steps) break;
    beta.push_back(b);
    for (double& x : w) x /= b;
    V.push_back(std::move(w));
  }

  const int m = static_cast<int>(alpha.size());
  if (m == 0) return defl;
  std::vector<double> d = alpha;
  std::vector<double> e(m, 0.0);
  for (int i = 1; i < m; ++i) e[i] = beta[i - 1];
  std::vector<double> z(static_cast<size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i) z[static_cast<size_t>(i) * m + i] = 1.0;
  tridiag_eigen(d, e, m, z);

  double lam_max = 0.0;
  for (double x : d) lam_max = std::max(lam_max, x);
  const double cutoff = cutoff_rel * lam_max;
  if (cutoff <= 0.0) return defl;
  for (int j = 0; j < m; ++j) {
    if (d[j] < cutoff) continue;
    std::vector<double> u(dim, 0.0);
    for (int k = 0; k < m; ++k) {
      const double c = z[static_cast<size_t>(k) * m + j];
      for (size_t i = 0; i < dim; ++i) u[i] += c * V[k][i];
    }
    defl.U.push_back(std::move(u));
    defl.lam.push_back(d[j]);
  }
  defl.sigma = cutoff;
  return defl;
}

struct CGOutcome {
  bool converged = false;
  int iterations = 0;
  std::vector<double> residuals;  // ||r||/||b|| per iteration, starting at 1
};

// (Preconditioned) conjugate gradients for an SPD operator; stopping on the
// true relative residual so the tolerance means the same with and without
// deflation.
inline CGOutcome conjugate_gradient(const ApplyFn& apply, const std::vector<double>& b,
                                    std::vector<double>& x, double tol, int max_iters,
                                    const Deflation* pre = nullptr) {
  CGOutcome out;
  x.assign(b.size(), 0.0);
  std::vector<double> r = b;
  const double b_norm = std::sqrt(dot(b, b));
  if (b_norm == 0.0) {
    out.converged = true;
    return out;
  }
  std::vector<double> z = pre != nullptr && !pre->empty() ? pre->apply(r) : r;
  double rz = dot(r, z);
  std::vector<double> p = z;
  out.residuals.push_back(1.0);
  for (int it = 0; it < max_iters; ++it) {
    const std::vector<double> q = apply(p);
    const double alpha = rz / dot(p, q);
    for (size_t i = 0; i < x.size(); ++i) x[i] += alpha * p[i];
    for (size_t i = 0; i < r.size(); ++i) r[i] -= alpha * q[i];
    const double res = std::sqrt(dot(r, r)) / b_norm;
    out.iterations = it + 1;
    out.residuals.push_back(res);
    if (res <= tol) {
      out.converged = true;
      break;
    }
    z = pre != nullptr && !pre->empty() ? pre->apply(r) : r;
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
  }
  return out;
}

}  // namespace poplab::krylov
