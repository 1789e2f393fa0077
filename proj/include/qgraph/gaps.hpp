#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "qgraph/errors.hpp"
#include "qgraph/graph.hpp"

namespace qg {

/// Distinct levels of a spectrum together with the original (1-based) indices of each level.
struct CollapsedSpectrum {
  std::vector<double> values;
  std::vector<std::vector<int>> members;
};

/// Merge values closer than rel_tol * max(1, |lambda|).
inline CollapsedSpectrum collapse_multiplicities(const std::vector<double>& lambdas, double rel_tol = 1e-12) {
  CollapsedSpectrum out;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double x = lambdas[i];
    if (!out.values.empty() && std::abs(x - out.values.back()) <= rel_tol * std::max(1.0, std::abs(x))) {
      out.members.back().push_back(static_cast<int>(i) + 1);
      continue;
    }
    if (!out.values.empty() && x < out.values.back()) throw InputError("spectrum is not ordered");
    out.values.push_back(x);
    out.members.push_back({static_cast<int>(i) + 1});
  }
  return out;
}

struct GapViolation {
  std::string kind;  // "uniform" for the M-step gap, "local" for the one-step gap fit
  int index = 0;
  double value = 0.0;
};

struct GapReport {
  int M = 1;
  double delta = 0.0;
  double d_tilde = 0.0;
  double C_fit = 0.0;
  int worst_index = 0;
  int k_from = 1;
  int k_to = 0;
  std::vector<GapViolation> violations;
  std::vector<std::vector<int>> collapse_map;
};

inline constexpr double kGapFloor = 1e-6;

inline std::vector<double> d_tilde_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 30; ++i) g.push_back(0.1 * i);
  return g;
}

/// Fit delta and (d_tilde, C_fit) on a strictly increasing sequence.
inline GapReport fit_gap_constants(const std::vector<double>& lambdas, int M) {
  if (M < 1) throw InputError("M must be positive");
  const int n = static_cast<int>(lambdas.size());
  if (n < M + 2) throw InputError("need at least M+2 values for a gap fit");
  for (int k = 0; k + 1 < n; ++k)
    if (!(lambdas[k + 1] > lambdas[k]))
      throw InputError("zero or negative gap at index " + std::to_string(k + 1) +
                       "; collapse multiplicities first");
  GapReport r;
  r.M = M;
  r.k_to = n;
  r.delta = std::numeric_limits<double>::infinity();
  for (int k = 0; k + M < n; ++k) {
    const double d = (lambdas[k + M] - lambdas[k]) / M;
    if (d < r.delta) {
      r.delta = d;
      r.worst_index = k + 1;
    }
  }
  if (!(r.delta > kGapFloor)) r.violations.push_back({"uniform", r.worst_index, r.delta});

  auto fit = [&](double dt) {
    const double p = M > 1 ? dt / (M - 1) : 0.0;
    double c = std::numeric_limits<double>::infinity();
    for (int k = 0; k + 1 < n; ++k) c = std::min(c, (lambdas[k + 1] - lambdas[k]) * std::pow(k + 1.0, p));
    return c;
  };
  if (M == 1) {
    r.d_tilde = 0.0;
    r.C_fit = fit(0.0);
  } else {
    bool found = false;
    for (double dt : d_tilde_grid()) {
      const double c = fit(dt);
      r.d_tilde = dt;
      r.C_fit = c;
      if (c > kGapFloor) {
        found = true;
        break;
      }
    }
    (void)found;
  }
  if (!(r.C_fit > kGapFloor)) {
    int worst = 1;
    double best = std::numeric_limits<double>::infinity();
    const double p = M > 1 ? r.d_tilde / (M - 1) : 0.0;
    for (int k = 0; k + 1 < n; ++k) {
      const double v = (lambdas[k + 1] - lambdas[k]) * std::pow(k + 1.0, p);
      if (v < best) {
        best = v;
        worst = k + 1;
      }
    }
    r.violations.push_back({"local", worst, best});
  }
  return r;
}

/// Collapse, then fit for the smallest M in [1, M_max] that has no violations.
/// Returns the last attempt when none succeeds.
inline GapReport search_gap_constants(const std::vector<double>& lambdas, int M_max) {
  const CollapsedSpectrum c = collapse_multiplicities(lambdas);
  GapReport r;
  for (int M = 1; M <= M_max; ++M) {
    if (static_cast<int>(c.values.size()) < M + 2) break;
    r = fit_gap_constants(c.values, M);
    r.collapse_map = c.members;
    if (r.violations.empty()) break;
  }
  return r;
}

inline nlohmann::json to_json(const GapReport& r) {
  nlohmann::json j;
  j["M"] = r.M;
  j["delta"] = r.delta;
  j["d_tilde"] = r.d_tilde;
  j["C_fit"] = r.C_fit;
  j["worst_index"] = r.worst_index;
  j["range"] = {r.k_from, r.k_to};
  j["violations"] = nlohmann::json::array();
  for (const auto& v : r.violations) j["violations"].push_back({{"kind", v.kind}, {"index", v.index}, {"value", v.value}});
  j["collapse_map"] = nlohmann::json::array();
  for (const auto& m : r.collapse_map)
    if (m.size() > 1) j["collapse_map"].push_back(m);
  return j;
}

/// Contiguous classes, 1-based inclusive index ranges.
struct ClassPartition {
  std::vector<std::pair<int, int>> classes;
  int size(int m) const { return classes[m].second - classes[m].first + 1; }
  int max_size() const {
    int s = 0;
    for (std::size_t m = 0; m < classes.size(); ++m) s = std::max(s, size(static_cast<int>(m)));
    return s;
  }
};

/// Greedy grouping: a new class starts whenever the next gap is at least delta.
/// With the M-step gap at least M*delta no class can exceed M members.
inline ClassPartition partition_classes(const std::vector<double>& lambdas, double delta, int M) {
  if (!(delta > 0.0) || M < 1) throw InputError("partition needs delta > 0 and M >= 1");
  ClassPartition p;
  const int n = static_cast<int>(lambdas.size());
  if (n == 0) return p;
  int start = 1;
  for (int k = 1; k < n; ++k) {
    if (lambdas[k] - lambdas[k - 1] >= delta) {
      p.classes.emplace_back(start, k);
      start = k + 1;
    }
  }
  p.classes.emplace_back(start, n);

  for (std::size_t m = 0; m < p.classes.size(); ++m) {
    const auto [a, b] = p.classes[m];
    if (b - a + 1 > M)
      throw HypothesisError("class " + std::to_string(m + 1) + " has " + std::to_string(b - a + 1) +
                            " members, more than M = " + std::to_string(M));
    // Sorted input: the class spread and the neighbouring-class distance bound every pair.
    if (b > a && !(lambdas[b - 1] - lambdas[a - 1] < delta * (M - 1)))
      throw HypothesisError("class " + std::to_string(m + 1) + " is wider than delta*(M-1)");
    if (m > 0 && !(lambdas[a - 1] - lambdas[p.classes[m - 1].second - 1] >= delta))
      throw HypothesisError("classes " + std::to_string(m) + " and " + std::to_string(m + 1) + " are closer than delta");
  }
  return p;
}

/// Positive roots of sum_l sin(x L_l) prod_{m != l} cos(x L_m), in increasing order.
/// Between consecutive poles of sum_l tan(x L_l) the function rises from -inf to +inf, so each
/// such interval holds exactly one root; poles shared by two or more edges are roots themselves.
inline std::vector<double> star_secular_roots(const std::vector<double>& lengths, int count) {
  using std::numbers::pi;
  if (lengths.empty() || count < 1) return {};
  double lmax = *std::max_element(lengths.begin(), lengths.end());
  double total = 0.0;
  for (double L : lengths) total += L;
  std::vector<double> out;
  double xmax = (count + 2) * pi / total;
  while (true) {
    std::vector<double> poles;
    for (double L : lengths)
      for (int m = 0; (m + 0.5) * pi / L <= xmax + pi / lmax; ++m) poles.push_back((m + 0.5) * pi / L);
    std::sort(poles.begin(), poles.end());
    std::vector<double> distinct;
    std::vector<int> mult;
    for (double x : poles) {
      if (!distinct.empty() && std::abs(x - distinct.back()) <= 1e-13 * x) {
        ++mult.back();
      } else {
        distinct.push_back(x);
        mult.push_back(1);
      }
    }
    auto f = [&](double x) {
      double s = 0.0;
      for (double L : lengths) s += std::tan(x * L);
      return s;
    };
    out.clear();
    double lo = 0.0;
    for (std::size_t i = 0; i < distinct.size(); ++i) {
      const double hi = distinct[i];
      if (lo > 0.0 || i > 0) {
        double a = lo, b = hi;
        for (int it = 0; it < 200 && b - a > 4e-16 * b; ++it) {
          const double c = 0.5 * (a + b);
          (f(c) < 0.0 ? a : b) = c;
        }
        out.push_back(0.5 * (a + b));
      }
      // On (0, first pole) the sum is positive, so the root at 0 is skipped.
      if (mult[i] >= 2) out.push_back(hi);
      lo = hi;
    }
    if (static_cast<int>(out.size()) >= count) break;
    xmax *= 1.5;
  }
  out.resize(count);
  return out;
}

struct SmallDivisorReport {
  double C_cos = 0.0;  // min |cos(w_n L_l)| w_n^(1+eps)
  int n_cos = 0, l_cos = 0;
  double C_sin = 0.0;  // min |sin(w_n L_l)| w_n^(1+eps)
  int n_sin = 0, l_sin = 0;
  bool flagged = false;
};

inline constexpr double kSmallDivisorFloor = 1e-8;

/// Both trig variants are scanned; a rational length ratio shows up in at least one of them.
inline SmallDivisorReport small_divisor_check(const std::vector<double>& omegas, const std::vector<double>& lengths,
                                              double epsilon) {
  SmallDivisorReport r;
  r.C_cos = r.C_sin = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < omegas.size(); ++n) {
    const double w = omegas[n];
    const double scale = std::pow(w, 1.0 + epsilon);
    for (std::size_t l = 0; l < lengths.size(); ++l) {
      const double c = std::abs(std::cos(w * lengths[l])) * scale;
      const double s = std::abs(std::sin(w * lengths[l])) * scale;
      if (c < r.C_cos) {
        r.C_cos = c;
        r.n_cos = static_cast<int>(n) + 1;
        r.l_cos = static_cast<int>(l) + 1;
      }
      if (s < r.C_sin) {
        r.C_sin = s;
        r.n_sin = static_cast<int>(n) + 1;
        r.l_sin = static_cast<int>(l) + 1;
      }
    }
  }
  r.flagged = !(r.C_cos > kSmallDivisorFloor) || !(r.C_sin > kSmallDivisorFloor);
  return r;
}

struct MergedGapReport {
  double C = 0.0;
  int argmin = 0;
  bool flagged = false;
};

/// Dirichlet levels (k pi / L)^2 of disjoint intervals, sorted, first `count`.
inline std::vector<double> dirichlet_intervals_spectrum(const std::vector<double>& lengths, int count) {
  using std::numbers::pi;
  std::vector<double> out;
  double lmax = *std::max_element(lengths.begin(), lengths.end());
  for (double L : lengths)
    for (int k = 1; k <= count * L / lmax + 1; ++k) out.push_back(std::pow(k * pi / L, 2));
  std::sort(out.begin(), out.end());
  out.resize(std::min<std::size_t>(out.size(), count));
  return out;
}

/// Minimum of |mu_{k+1} - mu_k| k^eps over consecutive entries of the merged spectra of two
/// interval families that come from different families, up to merged index K.
inline MergedGapReport merged_gap_bound(const std::vector<double>& lengths1, const std::vector<double>& lengths2,
                                      double epsilon, int K) {
  if (lengths1.empty() || lengths2.empty() || K < 2) throw InputError("merged_gap_bound needs two families and K >= 2");
  const auto a = dirichlet_intervals_spectrum(lengths1, K);
  const auto b = dirichlet_intervals_spectrum(lengths2, K);
  std::vector<std::pair<double, int>> merged;
  for (double x : a) merged.emplace_back(x, 0);
  for (double x : b) merged.emplace_back(x, 1);
  std::sort(merged.begin(), merged.end());
  merged.resize(std::min<std::size_t>(merged.size(), K));
  MergedGapReport r;
  r.C = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < merged.size(); ++k) {
    if (merged[k].second == merged[k + 1].second) continue;
    const double v = std::abs(merged[k + 1].first - merged[k].first) * std::pow(k + 1.0, epsilon);
    if (v < r.C) {
      r.C = v;
      r.argmin = static_cast<int>(k) + 1;
    }
  }
  // Coincidences show up as differences at rounding level of the eigenvalue itself.
  const double scale = merged.empty() ? 1.0 : merged.back().first;
  r.flagged = !(r.C > 1e-10 * scale);
  return r;
}

/// lambda_k <= mu_k <= lambda_{k+1} with mu the spectrum of the graph decoupled by Dirichlet
/// conditions at its internal vertices. Returns the 1-based indices that fail.
inline std::vector<int> interlacing_violations(const std::vector<double>& lambdas, const std::vector<double>& decoupled,
                                               double rel_tol = 1e-10) {
  std::vector<int> bad;
  const int n = static_cast<int>(std::min(lambdas.size() - 1, decoupled.size()));
  for (int k = 0; k < n; ++k) {
    const double tol = rel_tol * std::max(1.0, decoupled[k]);
    if (lambdas[k] > decoupled[k] + tol || decoupled[k] > lambdas[k + 1] + tol) bad.push_back(k + 1);
  }
  return bad;
}

/// Spectrum of g with Dirichlet conditions imposed at every internal vertex, which splits it
/// into independent intervals; external vertices keep their own condition.
inline std::vector<double> dirichlet_decoupled_spectrum(const MetricGraph& g, int count) {
  using std::numbers::pi;
  std::vector<double> out;
  double lmax = 0.0;
  for (const auto& e : g.edges()) lmax = std::max(lmax, e.length.value);
  auto neumann = [&](int v) { return g.is_external(v) && g.vertex(v).condition == Condition::Neumann; };
  for (const auto& e : g.edges()) {
    const double L = e.length.value;
    const int nn = (neumann(e.from) ? 1 : 0) + (neumann(e.to) ? 1 : 0);
    const double shift = nn == 1 ? 0.5 : 0.0;
    for (int k = nn == 2 ? 0 : 1; k <= count * L / lmax + 1; ++k) out.push_back(std::pow((k - shift) * pi / L, 2));
  }
  std::sort(out.begin(), out.end());
  out.resize(std::min<std::size_t>(out.size(), count));
  return out;
}

}  // namespace qg
