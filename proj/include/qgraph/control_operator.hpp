#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qgraph/edge_integrals.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/parallel.hpp"
#include "qgraph/spectrum.hpp"

namespace qg {

/// mu(x) = sum_n poly[n] x^n + amp sin(omega x + phase) on one edge.
struct EdgeProfile {
  std::vector<double> poly;
  double amp = 0.0;
  double omega = 0.0;
  double phase = 0.0;

  double operator()(double x) const {
    double v = 0.0;
    for (std::size_t n = poly.size(); n-- > 0;) v = v * x + poly[n];
    return v + amp * std::sin(omega * x + phase);
  }

  EdgeExpansion expansion() const {
    EdgeExpansion e;
    for (std::size_t n = 0; n < poly.size(); ++n) push_term(e, poly[n], static_cast<int>(n), 0.0, false);
    if (amp != 0.0) {
      push_term(e, amp * std::cos(phase), 0, omega, true);
      push_term(e, amp * std::sin(phase), 0, omega, false);
    }
    return e;
  }

  /// m-th derivative at x.
  double derivative(int m, double x) const {
    double v = 0.0;
    for (std::size_t n = m; n < poly.size(); ++n) {
      double c = poly[n];
      for (int i = 0; i < m; ++i) c *= static_cast<double>(n - i);
      v += c * std::pow(x, static_cast<double>(n - m));
    }
    if (amp != 0.0) v += amp * std::pow(omega, m) * std::sin(omega * x + phase + m * pi / 2);
    return v;
  }
};

/// Multiplication operator (B psi)^l = mu^l psi^l, one profile per edge.
struct ControlField {
  std::string preset;
  std::vector<EdgeProfile> profiles;
};

/// B_{j,k} = <phi_j, B phi_k>, Hermitian.
struct ControlMatrix {
  Eigen::MatrixXcd B;
  int K() const { return static_cast<int>(B.rows()); }
  cplx operator()(int j, int k) const { return B(j - 1, k - 1); }  // 1-based
};

// ----- presets -----

/// (x - L1)^4 on e1, zero elsewhere; vanishes to fourth order at the star center.
inline ControlField field_star_quartic(const MetricGraph& g) {
  ControlField f;
  f.preset = "thm1.2";
  f.profiles.resize(g.edge_count());
  const double L = g.length(0);
  f.profiles[0].poly = {L * L * L * L, -4 * L * L * L, 6 * L * L, -4 * L, 1.0};
  return f;
}

/// Skew part sin(2 pi x / L1) on the loop of a tadpole.
inline ControlField field_tadpole_skew(const MetricGraph& g) {
  ControlField f;
  f.preset = "thm1.3-skew";
  f.profiles.resize(g.edge_count());
  f.profiles[0].amp = 1.0;
  f.profiles[0].omega = 2 * pi / g.length(0);
  return f;
}

/// Symmetric part x(x - L1) on the loop and x^2 - (2L1 + 2L2)x + L2^2 + 2 L1 L2 on the tail.
inline ControlField field_tadpole_rest(const MetricGraph& g) {
  ControlField f;
  f.preset = "thm1.3-rest";
  f.profiles.resize(g.edge_count());
  const double L1 = g.length(0), L2 = g.length(1);
  f.profiles[0].poly = {0.0, -L1, 1.0};
  f.profiles[1].poly = {L2 * L2 + 2 * L1 * L2, -(2 * L1 + 2 * L2), 1.0};
  return f;
}

inline ControlField field_tadpole(const MetricGraph& g) {
  ControlField f = field_tadpole_rest(g);
  f.preset = "thm1.3";
  f.profiles[0].amp = 1.0;
  f.profiles[0].omega = 2 * pi / g.length(0);
  return f;
}

inline ControlField uniform_field(const MetricGraph& g, double c) {
  ControlField f;
  f.preset = "constant";
  f.profiles.assign(g.edge_count(), EdgeProfile{{c}});
  return f;
}

/// Field block of a graph document: {"preset": name} or {"edges": [{edge, poly, sin}]}.
inline ControlField build_field(const json& doc, const MetricGraph& g) {
  try {
    if (doc.contains("preset")) {
      const std::string p = doc.at("preset").get<std::string>();
      if (p == "thm1.2") {
        if (g.edge_count() < 2) throw InputError("preset thm1.2 needs a star graph");
        return field_star_quartic(g);
      }
      if (p == "thm1.3") {
        if (g.edge_count() != 2 || !g.edge(0).is_loop()) throw InputError("preset thm1.3 needs a tadpole graph");
        return field_tadpole(g);
      }
      if (p == "remark6.1") {
        if (!g.disjoint_family()) throw InputError("preset remark6.1 needs a disjoint-interval family");
        ControlField f;
        f.preset = p;
        f.profiles.resize(g.edge_count());
        return f;
      }
      throw InputError("unknown field preset '" + p + "'");
    }
    ControlField f;
    f.preset = "custom";
    f.profiles.resize(g.edge_count());
    std::map<std::string, int> ids;
    for (int e = 0; e < g.edge_count(); ++e) ids[g.edge(e).id] = e;
    for (const auto& item : doc.at("edges")) {
      const std::string id = item.at("edge").get<std::string>();
      auto it = ids.find(id);
      if (it == ids.end()) throw InputError("field references missing edge '" + id + "'");
      EdgeProfile& p = f.profiles[it->second];
      if (item.contains("poly")) p.poly = item.at("poly").get<std::vector<double>>();
      if (item.contains("sin")) {
        const auto& s = item.at("sin");
        p.amp = s.value("amp", 0.0);
        p.omega = s.value("omega", 0.0);
        p.phase = s.value("phase", 0.0);
      }
    }
    return f;
  } catch (const json::exception& ex) {
    throw InputError(std::string("malformed field description: ") + ex.what());
  }
}

// ----- matrix elements -----

inline ControlMatrix matrix_elements(const ControlField& field, const SpectralBasis& basis) {
  const MetricGraph& g = basis.graph;
  if (static_cast<int>(field.profiles.size()) != g.edge_count())
    throw InputError("field does not define a profile on every edge");
  const int K = basis.K();
  std::vector<EdgeExpansion> mu(g.edge_count());
  for (int e = 0; e < g.edge_count(); ++e) mu[e] = field.profiles[e].expansion();
  ControlMatrix M;
  M.B = Eigen::MatrixXcd::Zero(K, K);
  parallel_for(K, [&](int k) {
    std::vector<EdgeExpansion> bk(g.edge_count());
    for (int e = 0; e < g.edge_count(); ++e) bk[e] = multiply(mu[e], basis.pairs[k].on_edge(e));
    for (int j = 0; j <= k; ++j) {
      cplx s = 0.0;
      for (int e = 0; e < g.edge_count(); ++e)
        if (!mu[e].empty()) s += integrate(multiply(basis.pairs[j].on_edge(e), bk[e], true), g.length(e));
      M.B(j, k) = s;
    }
  });
  for (int k = 0; k < K; ++k) {
    M.B(k, k) = M.B(k, k).real();
    for (int j = 0; j < k; ++j) M.B(k, j) = std::conj(M.B(j, k));
  }
  return M;
}

/// Gram matrix of the stored eigenfunctions (field identically one).
inline Eigen::MatrixXcd gram_matrix(const SpectralBasis& basis) {
  return matrix_elements(uniform_field(basis.graph, 1.0), basis).B;
}

/// Cross-edge map on a disjoint family:
/// (B psi)^l(x) = sum_j sqrt(L_j / L_l) x^2 psi^j(L_j x / L_l).
/// Not symmetric for unequal lengths, hence a general complex matrix.
inline Eigen::MatrixXcd cross_edge_matrix(const SpectralBasis& basis) {
  const MetricGraph& g = basis.graph;
  const int K = basis.K(), n = g.edge_count();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(K, K);
  parallel_for(K, [&](int k) {
    const EigenPair& pk = basis.pairs[k];
    const double z = pk.z();
    for (int l = 0; l < n; ++l) {
      const double Ll = g.length(l);
      EdgeExpansion img;
      for (int jj = 0; jj < n; ++jj) {
        const double r = g.length(jj) / Ll;
        // psi^j(r x) = a cos(z r x) + b sin(z r x), or a + b r x at z = 0.
        EdgeExpansion part =
            z == 0.0 ? mode_expansion(pk.a[jj], pk.b[jj] * r, 0.0) : mode_expansion(pk.a[jj], pk.b[jj], z * r);
        for (auto& t : part) {
          t.coef *= std::sqrt(r);
          t.power += 2;
          img.push_back(t);
        }
      }
      for (int j = 0; j < K; ++j) out(j, k) += integrate(multiply(basis.pairs[j].on_edge(l), img, true), Ll);
    }
  });
  return out;
}

// ----- Assumptions I -----

struct I1Report {
  double exponent = 0.0;
  double C_fit = 0.0;
  int argmin = 0;
  std::vector<int> violations;  // j with |B_{1,j}| below 1e-14
};

/// C_fit = min_j |B_{1,j}| j^exponent over j = 1..K.
inline I1Report assumption_I1_check(const ControlMatrix& M, double exponent) {
  I1Report r;
  r.exponent = exponent;
  r.C_fit = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= M.K(); ++j) {
    const double b = std::abs(M(1, j));
    if (b < 1e-14) r.violations.push_back(j);
    const double v = b * std::pow(static_cast<double>(j), exponent);
    if (v < r.C_fit) {
      r.C_fit = v;
      r.argmin = j;
    }
  }
  return r;
}

struct Quadruple {
  int j, k, l, m;  // lambda_j - lambda_k ~ lambda_l - lambda_m, 1-based
  double freq_mismatch;
  double b_difference;
};

/// Resonant quadruples whose diagonal B-differences fail to separate them.
/// Frequency tolerance is tol * lambda_K; the B test uses tol * max |B_kk|.
inline std::vector<Quadruple> assumption_I2_check(const ControlMatrix& M, const std::vector<double>& lambdas,
                                                  double tol, bool sorted_scan = false) {
  const int K = std::min<int>(M.K(), static_cast<int>(lambdas.size()));
  const double ftol = tol * std::max(1.0, std::abs(lambdas[K - 1]));
  double bmax = 0.0;
  for (int k = 0; k < K; ++k) bmax = std::max(bmax, std::abs(M.B(k, k)));
  const double btol = tol * std::max(bmax, 1e-300);
  struct Diff {
    double d;
    int j, k;
  };
  std::vector<Diff> diffs;
  for (int j = 0; j < K; ++j)
    for (int k = 0; k < j; ++k) diffs.push_back({lambdas[j] - lambdas[k], j, k});
  std::vector<Quadruple> out;
  auto test = [&](const Diff& p, const Diff& q) {
    const double fm = std::abs(p.d - q.d);
    if (fm >= ftol) return;
    const double bd = std::abs((M.B(p.j, p.j) - M.B(p.k, p.k) - M.B(q.j, q.j) + M.B(q.k, q.k)).real());
    if (bd <= btol) out.push_back({p.j + 1, p.k + 1, q.j + 1, q.k + 1, fm, bd});
  };
  if (!sorted_scan) {
    for (std::size_t a = 0; a < diffs.size(); ++a)
      for (std::size_t b = a + 1; b < diffs.size(); ++b) test(diffs[a], diffs[b]);
  } else {
    std::vector<std::size_t> order(diffs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return diffs[x].d < diffs[y].d; });
    for (std::size_t a = 0; a < order.size(); ++a)
      for (std::size_t b = a + 1; b < order.size() && diffs[order[b]].d - diffs[order[a]].d < ftol; ++b) {
        const auto& p = diffs[std::min(order[a], order[b])];
        const auto& q = diffs[std::max(order[a], order[b])];
        test(p, q);
      }
    std::sort(out.begin(), out.end(), [](const Quadruple& x, const Quadruple& y) {
      return std::tie(x.j, x.k, x.l, x.m) < std::tie(y.j, y.k, y.l, y.m);
    });
  }
  return out;
}

// ----- first-order perturbation -----

struct PerturbedSpectrum {
  double u0 = 0.0;
  std::vector<double> lambdas;
  std::vector<double> residual;  // lambda_k(u0) - lambda_k - u0 B_kk
};

inline PerturbedSpectrum perturbed_spectrum(const SpectralBasis& basis, const ControlMatrix& M, double u0) {
  const int K = std::min(basis.K(), M.K());
  Eigen::MatrixXcd H = u0 * M.B.topLeftCorner(K, K);
  for (int k = 0; k < K; ++k) H(k, k) += basis.pairs[k].lambda;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverError("eigensolve failed in perturbed_spectrum");
  PerturbedSpectrum out;
  out.u0 = u0;
  for (int k = 0; k < K; ++k) {
    out.lambdas.push_back(es.eigenvalues()(k));
    out.residual.push_back(es.eigenvalues()(k) - basis.pairs[k].lambda - u0 * M.B(k, k).real());
  }
  return out;
}

// ----- Assumptions II surrogate -----

/// Order of vanishing of the profile at one end: smallest m with mu^(m)(x) != 0, capped.
inline int vanishing_order(const EdgeProfile& p, double x, int cap = 8) {
  double scale = 1.0;
  for (double c : p.poly) scale = std::max(scale, std::abs(c));
  scale = std::max(scale, std::abs(p.amp));
  for (int m = 0; m < cap; ++m) {
    const double d = p.derivative(m, x);
    const double ref = scale * std::pow(std::max(1.0, std::max(std::abs(x), std::abs(p.omega))), m) * 1e-12;
    if (std::abs(d) > ref) return m;
  }
  return cap;
}

/// Minimum vanishing order of the field over all edge ends at a vertex. With order q,
/// derivatives of B psi up to order q - 1 vanish there for every smooth psi.
inline int vertex_vanishing_order(const ControlField& f, const MetricGraph& g, int v, int cap = 8) {
  int order = cap;
  for (const auto& end : g.incident(v)) {
    const double x = end.far ? g.length(end.edge) : 0.0;
    order = std::min(order, vanishing_order(f.profiles[end.edge], x, cap));
  }
  return order;
}

// ----- closed forms for the quartic star field -----

namespace detail {
/// 2 [c^3 L^3 - 6 c L + 6 sin(c L)] / c^5, continued to c = 0.
inline double quartic_kernel(double c, double L) {
  const double x = c * L;
  if (std::abs(x) < 1.0) {
    // 12 sum_m (-1)^m x^(2m) / (2m+5)!, times L^5
    double term = 1.0 / 120.0, sum = 0.0;
    for (int m = 0; m < 30; ++m) {
      sum += term;
      term *= -x * x / ((2.0 * m + 6) * (2.0 * m + 7));
    }
    return 12.0 * sum * std::pow(L, 5);
  }
  return 2.0 * (x * x * x - 6 * x + 6 * std::sin(x)) / std::pow(c, 5);
}
}  // namespace detail

/// int_0^L (y - L)^4 sin(z1 y) sin(zj y) dy in closed form (j = 1 is the c -> 0 limit).
inline double star_quartic_integral(double z1, double zj, double L) {
  return detail::quartic_kernel(z1 - zj, L) - detail::quartic_kernel(z1 + zj, L);
}

/// sqrt(a_1) sqrt(a_j) B_j(L1) for the quartic field on a Dirichlet star.
inline double star_quartic_closed_form(const SpectralBasis& basis, int j) {
  const auto n1 = star_normalization(basis, 1);
  const auto nj = star_normalization(basis, j);
  if (n1.degenerate_branch || nj.degenerate_branch) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(n1.a1_squared) * std::sqrt(nj.a1_squared) *
         star_quartic_integral(std::sqrt(basis.lambda(1)), std::sqrt(basis.lambda(j)), basis.graph.length(0));
}

}  // namespace qg
