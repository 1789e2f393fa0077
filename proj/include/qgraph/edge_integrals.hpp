#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace qg {

using cplx = std::complex<double>;

/// sin(x)/x, accurate near zero.
inline double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

/// Moments C[n] = int_0^L x^n cos(c x) dx and S[n] = int_0^L x^n sin(c x) dx, n = 0..n_max.
struct PowerTrigMoments {
  std::vector<double> cos_m;
  std::vector<double> sin_m;
};

inline PowerTrigMoments power_trig_moments(int n_max, double c, double L) {
  PowerTrigMoments out;
  out.cos_m.assign(n_max + 1, 0.0);
  out.sin_m.assign(n_max + 1, 0.0);
  c = std::abs(c);  // callers fold the sign of sin terms themselves
  const double cl = c * L;
  if (cl <= std::max(2.0, static_cast<double>(n_max))) {
    // Power series in c; terms peak near m ~ cL/2 so the loss stays below a few digits.
    for (int n = 0; n <= n_max; ++n) {
      double cs = 0.0, ss = 0.0;
      double fac = 1.0;  // c^k / k!
      const double Ln1 = std::pow(L, n + 1);
      double Lk = Ln1;   // L^(n+k+1)
      for (int k = 0; k < 400; ++k) {
        const double term = fac * Lk / (n + k + 1);
        if (k % 2 == 0)
          cs += ((k / 2) % 2 == 0 ? term : -term);
        else
          ss += (((k - 1) / 2) % 2 == 0 ? term : -term);
        if (k > cl + 4 && std::abs(term) < 1e-18 * (std::abs(cs) + std::abs(ss) + Ln1 * 1e-300)) break;
        fac *= c / (k + 1);
        Lk *= L;
      }
      out.cos_m[n] = cs;
      out.sin_m[n] = ss;
    }
    return out;
  }
  const double s = std::sin(cl), co = std::cos(cl);
  out.cos_m[0] = s / c;
  out.sin_m[0] = (1.0 - co) / c;
  double Ln = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    Ln *= L;
    out.cos_m[n] = Ln * s / c - n / c * out.sin_m[n - 1];
    out.sin_m[n] = -Ln * co / c + n / c * out.cos_m[n - 1];
  }
  return out;
}

/// One term coef * x^n * (cos|sin)(w x) of a function on an edge; w >= 0.
struct TrigTerm {
  cplx coef;
  int power = 0;
  double w = 0.0;
  bool is_sin = false;
};

using EdgeExpansion = std::vector<TrigTerm>;

inline void push_term(EdgeExpansion& out, cplx coef, int n, double w, bool is_sin) {
  if (coef == cplx(0.0)) return;
  if (w < 0.0) {
    w = -w;
    if (is_sin) coef = -coef;
  }
  if (is_sin && w == 0.0) return;
  out.push_back({coef, n, w, is_sin});
}

/// Pointwise product via product-to-sum; conj_left conjugates the first factor.
inline EdgeExpansion multiply(const EdgeExpansion& a, const EdgeExpansion& b, bool conj_left = false) {
  EdgeExpansion out;
  out.reserve(2 * a.size() * b.size());
  for (const auto& s : a) {
    const cplx ca = conj_left ? std::conj(s.coef) : s.coef;
    for (const auto& t : b) {
      const cplx h = 0.5 * ca * t.coef;
      const int n = s.power + t.power;
      const double dm = s.w - t.w, dp = s.w + t.w;
      if (!s.is_sin && !t.is_sin) {
        push_term(out, h, n, dm, false);
        push_term(out, h, n, dp, false);
      } else if (s.is_sin && t.is_sin) {
        push_term(out, h, n, dm, false);
        push_term(out, -h, n, dp, false);
      } else if (!s.is_sin && t.is_sin) {
        push_term(out, h, n, dp, true);
        push_term(out, -h, n, dm, true);
      } else {
        push_term(out, h, n, dp, true);
        push_term(out, h, n, dm, true);
      }
    }
  }
  return out;
}

/// int_0^L of an expansion, grouping terms by frequency so each moment table is built once.
inline cplx integrate(const EdgeExpansion& f, double L) {
  struct Table {
    double w;
    int n_max;
    PowerTrigMoments m;
  };
  std::vector<Table> tables;
  int n_max = 0;
  for (const auto& t : f) n_max = std::max(n_max, t.power);
  cplx sum = 0.0;
  for (const auto& t : f) {
    const Table* tab = nullptr;
    for (const auto& x : tables)
      if (x.w == t.w) tab = &x;
    if (!tab) {
      tables.push_back({t.w, n_max, power_trig_moments(n_max, t.w, L)});
      tab = &tables.back();
    }
    sum += t.coef * (t.is_sin ? tab->m.sin_m[t.power] : tab->m.cos_m[t.power]);
  }
  return sum;
}

/// a cos(z x) + b sin(z x), or a + b x when z == 0.
inline EdgeExpansion mode_expansion(cplx a, cplx b, double z) {
  EdgeExpansion e;
  if (z == 0.0) {
    push_term(e, a, 0, 0.0, false);
    push_term(e, b, 1, 0.0, false);
  } else {
    push_term(e, a, 0, z, false);
    push_term(e, b, 0, z, true);
  }
  return e;
}

}  // namespace qg
