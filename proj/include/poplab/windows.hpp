#pragma once

#include <string>
#include <vector>

#include "poplab/grid.hpp"

namespace poplab {

enum class Variant { both_sexes, male_only, female_only };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::both_sexes: return "both-sexes";
    case Variant::male_only: return "male-only";
    default: return "female-only";
  }
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains_open(double x) const { return x > lo && x < hi; }
  double length() const { return hi - lo; }
};

// Control geometry: spatial windows omega, omega' and age windows (a1,a2),
// (b1,b2); Theta uses the age window (0, a2) in the male-only variant.
struct ControlWindows {
  Interval omega;        // male spatial window
  Interval omega_prime;  // female spatial window
  Interval age_m;        // (a1, a2)
  Interval age_f;        // (b1, b2)
  Variant variant = Variant::both_sexes;
  double rho = 0.0;      // male-only target floor age

  Interval male_age_window() const {
    if (variant == Variant::male_only) return {0.0, age_m.hi};
    return age_m;
  }
};

// Space-age indicator on grid cells whose centers lie in the open windows.
struct Mask {
  std::vector<char> space;  // nx
  std::vector<char> age;    // na+1

  bool on(int i, int j) const { return age[i] && space[j]; }
  bool any() const {
    bool sa = false, sx = false;
    for (char c : age) sa |= (c != 0);
    for (char c : space) sx |= (c != 0);
    return sa && sx;
  }
};

inline Mask make_mask(const Grid& g, const Interval& space_win, const Interval& age_win) {
  Mask m;
  m.space.assign(g.nx, 0);
  m.age.assign(g.na + 1, 0);
  for (int j = 0; j < g.nx; ++j) m.space[j] = space_win.contains_open(g.x(j)) ? 1 : 0;
  for (int i = 0; i <= g.na; ++i) m.age[i] = age_win.contains_open(g.age(i)) ? 1 : 0;
  return m;
}

inline Mask male_mask(const ControlWindows& w, const Grid& g) {
  return make_mask(g, w.omega, w.male_age_window());
}

inline Mask female_mask(const ControlWindows& w, const Grid& g) {
  return make_mask(g, w.omega_prime, w.age_f);
}

inline void apply_mask(Field& f, const Mask& m) {
  for (int i = 0; i <= f.na; ++i) {
    if (!m.age[i]) {
      auto r = f.row(i);
      for (double& x : r) x = 0.0;
      continue;
    }
    auto r = f.row(i);
    for (int j = 0; j < f.nx; ++j)
      if (!m.space[j]) r[j] = 0.0;
  }
}

// Keep only rows with age in the open interval (lo, hi).
inline void restrict_ages(Field& f, const Grid& g, double lo, double hi) {
  for (int i = 0; i <= g.na; ++i) {
    const double a = g.age(i);
    if (a <= lo || a >= hi) {
      auto r = f.row(i);
      for (double& x : r) x = 0.0;
    }
  }
}

}  // namespace poplab
