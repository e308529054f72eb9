#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace poplab {

// Aligned age/time/space discretization on the unit spatial interval with
// homogeneous Dirichlet ends. The age step and the time step coincide, so
// transport along characteristics is an exact index shift.
struct Grid {
  int nx = 0;   // interior spatial nodes
  int na = 0;   // age steps; ages 0..na cover [0, A]
  int nt = 0;   // time steps; times 0..nt cover [0, T]
  double A = 1.0;
  double T = 1.0;

  Grid() = default;
  Grid(int nx_, int na_, double A_, double T_) : nx(nx_), na(na_), A(A_), T(T_) {
    if (nx < 1 || na < 1 || A <= 0.0 || T <= 0.0)
      throw std::invalid_argument("Grid: nx, na >= 1 and A, T > 0 required");
    const double step = A / na;
    const double k = T / step;
    nt = static_cast<int>(std::lround(k));
    if (nt < 1 || std::abs(k - nt) > 1e-9)
      throw std::invalid_argument("Grid: T must be an integer multiple of da = A/na");
  }

  double dx() const { return 1.0 / (nx + 1); }
  double da() const { return A / na; }
  double dt() const { return A / na; }  // dt = da by construction
  double x(int j) const { return (j + 1) * dx(); }
  double age(int i) const { return i * da(); }
  double time(int k) const { return k * dt(); }
};

// Density field on one time slice: (na+1) age rows of nx spatial values.
struct Field {
  int nx = 0;
  int na = 0;
  std::vector<double> v;  // row-major, row i = age index

  Field() = default;
  Field(int nx_, int na_) : nx(nx_), na(na_), v(static_cast<size_t>(nx_) * (na_ + 1), 0.0) {}
  explicit Field(const Grid& g) : Field(g.nx, g.na) {}

  double& at(int i, int j) { return v[static_cast<size_t>(i) * nx + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * nx + j]; }
  std::span<double> row(int i) { return {v.data() + static_cast<size_t>(i) * nx, static_cast<size_t>(nx)}; }
  std::span<const double> row(int i) const {
    return {v.data() + static_cast<size_t>(i) * nx, static_cast<size_t>(nx)};
  }
  int rows() const { return na + 1; }

  bool same_shape(const Field& o) const { return nx == o.nx && na == o.na; }
};

inline Field& operator+=(Field& a, const Field& b) {
  for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
  return a;
}
inline Field& operator-=(Field& a, const Field& b) {
  for (size_t i = 0; i < a.v.size(); ++i) a.v[i] -= b.v[i];
  return a;
}
inline Field& operator*=(Field& a, double s) {
  for (double& x : a.v) x *= s;
  return a;
}
inline Field operator+(Field a, const Field& b) { a += b; return a; }
inline Field operator-(Field a, const Field& b) { a -= b; return a; }
inline Field operator*(double s, Field a) { a *= s; return a; }

// Scalar profile on space x time, e.g. p(x,t), M(x,t), renewal traces.
struct SpaceTimeProfile {
  int nx = 0;
  int nt = 0;
  std::vector<double> v;  // row-major, row k = time index, nt+1 rows

  SpaceTimeProfile() = default;
  SpaceTimeProfile(int nx_, int nt_) : nx(nx_), nt(nt_), v(static_cast<size_t>(nx_) * (nt_ + 1), 0.0) {}
  explicit SpaceTimeProfile(const Grid& g) : SpaceTimeProfile(g.nx, g.nt) {}

  double& at(int k, int j) { return v[static_cast<size_t>(k) * nx + j]; }
  double at(int k, int j) const { return v[static_cast<size_t>(k) * nx + j]; }
  std::span<double> slice(int k) { return {v.data() + static_cast<size_t>(k) * nx, static_cast<size_t>(nx)}; }
  std::span<const double> slice(int k) const {
    return {v.data() + static_cast<size_t>(k) * nx, static_cast<size_t>(nx)};
  }
};

// Time-indexed trajectory of one sex, plus the age-zero boundary record.
struct SexTrajectory {
  std::vector<Field> slices;        // nt+1 slices
  SpaceTimeProfile renewal_trace;   // row k = slice k, age-0 row

  const Field& final_slice() const { return slices.back(); }
};

// Control field over Q: one slice per time step, index k acts on step k -> k+1.
struct ControlField {
  std::vector<Field> slices;  // nt entries

  ControlField() = default;
  ControlField(const Grid& g) : slices(g.nt, Field(g)) {}
  bool empty() const { return slices.empty(); }
};

// --- dx.da weighted inner products and norms -------------------------------

inline double dot_qa(const Field& a, const Field& b, const Grid& g) {
  double s = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s * g.dx() * g.da();
}

inline double norm_qa(const Field& a, const Grid& g) { return std::sqrt(dot_qa(a, a, g)); }

// dx.da.dt weighted pairing of two control-shaped fields over Q.
inline double dot_q(const ControlField& a, const ControlField& b, const Grid& g) {
  double s = 0.0;
  for (size_t k = 0; k < a.slices.size(); ++k) s += dot_qa(a.slices[k], b.slices[k], g);
  return s * g.dt();
}

inline double norm_q(const ControlField& a, const Grid& g) { return std::sqrt(dot_q(a, a, g)); }

inline double dot_qt(const SpaceTimeProfile& a, const SpaceTimeProfile& b, const Grid& g) {
  double s = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s * g.dx() * g.dt();
}

inline double norm_qt(const SpaceTimeProfile& a, const Grid& g) { return std::sqrt(dot_qt(a, a, g)); }

// Restriction of the Q_A norm to grid ages in the open interval (lo, hi).
inline double norm_qa_ages(const Field& a, const Grid& g, double lo, double hi) {
  double s = 0.0;
  for (int i = 0; i <= g.na; ++i) {
    const double age = g.age(i);
    if (age <= lo || age >= hi) continue;
    for (int j = 0; j < g.nx; ++j) s += a.at(i, j) * a.at(i, j);
  }
  return std::sqrt(s * g.dx() * g.da());
}

}  // namespace poplab
