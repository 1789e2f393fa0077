#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qgraph/edge_integrals.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/parallel.hpp"

namespace qg {

using std::numbers::pi;

/// phi^l(x) = a_l cos(sqrt(lambda) x) + b_l sin(sqrt(lambda) x), or a_l + b_l x at lambda = 0.
struct EigenPair {
  int index = 0;  // 1-based
  double lambda = 0.0;
  std::vector<cplx> a;
  std::vector<cplx> b;
  int multiplicity = 1;

  double z() const { return std::sqrt(lambda); }
  EdgeExpansion on_edge(int e) const { return mode_expansion(a[e], b[e], z()); }
};

/// C1 k^2 <= lambda_k <= C2 k^2 for k >= 2. C1, C2 are rigorous bounds from the
/// decoupled Dirichlet/Neumann brackets; observed_* are the extremes on the computed range.
struct WeylBounds {
  double C1 = 0.0;
  double C2 = 0.0;
  double observed_min = 0.0;
  double observed_max = 0.0;
  int k_from = 2;
  int k_to = 0;
};

struct SpectralBasis {
  MetricGraph graph;
  std::vector<EigenPair> pairs;
  WeylBounds weyl;

  int K() const { return static_cast<int>(pairs.size()); }
  double lambda(int k) const { return pairs[k - 1].lambda; }
  const EigenPair& pair(int k) const { return pairs[k - 1]; }
  std::vector<double> lambdas() const {
    std::vector<double> out;
    for (const auto& p : pairs) out.push_back(p.lambda);
    return out;
  }
};

using BasisPtr = std::shared_ptr<const SpectralBasis>;

namespace detail {

/// Rows of the homogeneous vertex system in the unknowns (a_1, b_1, ..., a_N, b_N).
/// Derivative rows carry a 1/z factor so every entry is bounded by 1.
inline Eigen::MatrixXd vertex_system(const MetricGraph& g, double z) {
  const int n = g.edge_count();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  int row = 0;
  auto value_row = [&](int r, const EdgeEnd& end, double sign) {
    const double x = end.far ? g.length(end.edge) : 0.0;
    A(r, 2 * end.edge) += sign * std::cos(z * x);
    A(r, 2 * end.edge + 1) += sign * std::sin(z * x);
  };
  // Outgoing derivative divided by z.
  auto deriv_row = [&](int r, const EdgeEnd& end) {
    const double x = end.far ? g.length(end.edge) : 0.0;
    const double out = end.far ? -1.0 : 1.0;
    A(r, 2 * end.edge) += -out * std::sin(z * x);
    A(r, 2 * end.edge + 1) += out * std::cos(z * x);
  };
  for (int v = 0; v < g.vertex_count(); ++v) {
    const auto& ends = g.incident(v);
    switch (g.vertex(v).condition) {
      case Condition::Dirichlet:
        for (const auto& e : ends) value_row(row++, e, 1.0);
        break;
      case Condition::Neumann:
        for (const auto& e : ends) deriv_row(row++, e);
        break;
      case Condition::NeumannKirchhoff:
        for (std::size_t i = 1; i < ends.size(); ++i) {
          value_row(row, ends[i], 1.0);
          value_row(row, ends[0], -1.0);
          ++row;
        }
        for (const auto& e : ends) deriv_row(row, e);
        ++row;
        break;
    }
  }
  return A;
}

/// Number of m >= 1 with m*pi < theta, read off the sign of sin(theta) so it agrees
/// with the sine used elsewhere at the same point.
inline int dirichlet_count(double theta, double s) {
  int m = static_cast<int>(std::floor(theta / pi));
  const bool odd = (m % 2) != 0;
  const bool positive = s > 0;
  if (positive == odd) {
    if (theta / pi - m < 0.5)
      --m;
    else
      ++m;
  }
  return std::max(m, 0);
}

/// N(z) = #{lambda_k < z^2} as the Dirichlet-decoupled count plus the positive index
/// of the vertex Dirichlet-to-Neumann matrix. Returns -1 if some sin(z L) is exactly zero.
inline int eigen_count(const MetricGraph& g, double z) {
  std::vector<int> slot(g.vertex_count(), -1);
  int m = 0;
  for (int v = 0; v < g.vertex_count(); ++v)
    if (g.vertex(v).condition != Condition::Dirichlet) slot[v] = m++;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
  int count = 0;
  for (int e = 0; e < g.edge_count(); ++e) {
    const Edge& ed = g.edge(e);
    const double th = z * ed.length.value;
    const double s = std::sin(th), c = std::cos(th);
    if (s == 0.0) return -1;
    count += dirichlet_count(th, s);
    const int p = slot[ed.from], q = slot[ed.to];
    if (ed.is_loop()) {
      if (p >= 0) M(p, p) += 2.0 * z * (1.0 - c) / s;
      continue;
    }
    if (p >= 0) M(p, p) -= z * c / s;
    if (q >= 0) M(q, q) -= z * c / s;
    if (p >= 0 && q >= 0) {
      M(p, q) += z / s;
      M(q, p) += z / s;
    }
  }
  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    for (int i = 0; i < m; ++i) count += es.eigenvalues()(i) > 0.0 ? 1 : 0;
  }
  return count;
}

inline int eigen_count_safe(const MetricGraph& g, double& z) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    const int c = eigen_count(g, z);
    if (c >= 0) return c;
    z = std::nextafter(z, 2.0 * z + 1.0);
  }
  throw SolverError("eigen count undefined near z = " + std::to_string(z));
}

struct Level {
  double z;
  int multiplicity;
};

/// Recursive subdivision on the count; levels narrower than the tolerance are clusters.
inline void isolate(const MetricGraph& g, double lo, double hi, int clo, int chi, std::vector<Level>& out) {
  if (chi <= clo) return;
  const double tol = 1e-14 * std::max(1.0, hi);
  double mid = 0.5 * (lo + hi);
  if (hi - lo <= tol || mid <= lo || mid >= hi) {
    out.push_back({0.5 * (lo + hi), chi - clo});
    return;
  }
  int cm = eigen_count_safe(g, mid);
  cm = std::clamp(cm, clo, chi);
  isolate(g, lo, mid, clo, cm, out);
  isolate(g, mid, hi, cm, chi, out);
}

/// Sum of the d smallest singular values of the vertex system; vanishes linearly at a level.
inline double null_defect(const MetricGraph& g, double z, int d) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(vertex_system(g, z));
  const auto& sv = svd.singularValues();
  return sv.tail(d).sum();
}

/// The count is only sqrt(eps)-accurate where a level coincides with a pole of the
/// Dirichlet-to-Neumann matrix, so each level is re-located by a golden-section search
/// on the null defect inside a small window.
inline double polish_level(const MetricGraph& g, double z, int d, double window) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = z - window, b = z + window;
  double c = b - r * (b - a), e = a + r * (b - a);
  double fc = null_defect(g, c, d), fe = null_defect(g, e, d);
  for (int it = 0; it < 200 && b - a > 2e-16 * b; ++it) {
    if (fc < fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - r * (b - a);
      fc = null_defect(g, c, d);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + r * (b - a);
      fe = null_defect(g, e, d);
    }
  }
  return 0.5 * (a + b);
}

/// Per-edge L2 Gram blocks of (cos, sin) at frequency z.
inline Eigen::MatrixXd l2_weight(const MetricGraph& g, double z) {
  const int n = g.edge_count();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int e = 0; e < n; ++e) {
    const double L = g.length(e);
    const double s2 = L * sinc(2.0 * z * L);  // sin(2zL)/(2z)
    W(2 * e, 2 * e) = 0.5 * (L + s2);
    W(2 * e + 1, 2 * e + 1) = 0.5 * (L - s2);
    const double sl = std::sin(z * L);
    W(2 * e, 2 * e + 1) = W(2 * e + 1, 2 * e) = 0.5 * sl * sl / z;
  }
  return W;
}

inline void fix_sign(Eigen::VectorXd& v) {
  const double scale = v.cwiseAbs().maxCoeff();
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-10 * scale) {
      if (v(i) < 0) v = -v;
      return;
    }
  }
}

/// L2-orthonormal eigenfunction coefficients at a positive level of multiplicity d.
inline std::vector<Eigen::VectorXd> level_eigenvectors(const MetricGraph& g, double z, int d) {
  const Eigen::MatrixXd A = vertex_system(g, z);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();  // descending
  const int n2 = static_cast<int>(sv.size());
  const double smax = std::max(sv(0), 1e-300);
  int nullity = 0;
  for (int i = 0; i < n2; ++i) nullity += sv(i) < 1e-8 * smax ? 1 : 0;
  if (nullity != d)
    throw SolverError("ill-conditioned null space at z = " + std::to_string(z) + ": count multiplicity " +
                      std::to_string(d) + ", null-space dimension " + std::to_string(nullity));
  Eigen::MatrixXd N = svd.matrixV().rightCols(d);
  const Eigen::MatrixXd W = l2_weight(g, z);
  std::vector<Eigen::VectorXd> basis;
  if (d == 1) {
    Eigen::VectorXd v = N.col(0);
    v /= std::sqrt(v.dot(W * v));
    fix_sign(v);
    basis.push_back(v);
    return basis;
  }
  // Canonical basis inside the eigenspace: L2 projections of coordinate vectors, in order,
  // orthonormalized in L2. Depends only on the subspace, not on the SVD's choice.
  Eigen::MatrixXd G = N.transpose() * W * N;
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  Eigen::MatrixXd Q = llt.matrixU().solve<Eigen::OnTheRight>(N);
  Eigen::MatrixXd P = Q * Q.transpose() * W;
  double ref = 0.0;
  for (int i = 0; i < n2; ++i) ref = std::max(ref, std::sqrt(P.col(i).dot(W * P.col(i))));
  for (int i = 0; i < n2 && static_cast<int>(basis.size()) < d; ++i) {
    Eigen::VectorXd v = P.col(i);
    for (const auto& u : basis) v -= u.dot(W * v) * u;
    const double nv = std::sqrt(std::max(0.0, v.dot(W * v)));
    if (nv <= 1e-6 * ref) continue;
    v /= nv;
    for (const auto& u : basis) v -= u.dot(W * v) * u;  // second pass
    v /= std::sqrt(v.dot(W * v));
    fix_sign(v);
    basis.push_back(v);
  }
  if (static_cast<int>(basis.size()) != d) throw SolverError("could not span a degenerate eigenspace");
  return basis;
}

/// Eigenvalue counts of the two decoupled comparison problems.
inline int decoupled_count(const MetricGraph& g, double lam, bool neumann) {
  int c = 0;
  for (const auto& e : g.edges()) {
    const double lim = std::sqrt(lam) * e.length.value / pi;
    int m = static_cast<int>(std::ceil(lim)) - 1;  // m with m < lim
    c += std::max(m, 0) + (neumann ? 1 : 0);
  }
  return c;
}

}  // namespace detail

/// Scaled real determinant of the 2N x 2N vertex system; its positive zeros are sqrt(lambda_k).
inline double secular_determinant(const MetricGraph& g, double z) {
  if (!(z > 0.0)) throw InputError("secular_determinant needs z > 0");
  return detail::vertex_system(g, z).partialPivLu().determinant();
}

/// Eigenvalue count #{lambda_k < Lambda}.
inline int count_below(const MetricGraph& g, double Lambda) {
  if (Lambda <= 0.0) return 0;
  double z = std::sqrt(Lambda);
  return detail::eigen_count_safe(g, z);
}

inline WeylBounds weyl_bounds(const MetricGraph& g, const std::vector<double>& lambdas) {
  WeylBounds w;
  const double total = total_length(g);
  double lmin = g.length(0);
  for (const auto& e : g.edges()) lmin = std::min(lmin, e.length.value);
  const int n = g.edge_count();
  w.C2 = pi * pi / (lmin * lmin);
  w.C1 = pi * pi / (4.0 * total * total);
  const int K = static_cast<int>(lambdas.size());
  w.k_to = K;
  w.observed_min = std::numeric_limits<double>::infinity();
  w.observed_max = 0.0;
  for (int k = 2; k <= K; ++k) {
    const double r = lambdas[k - 1] / (double(k) * k);
    if (k < 2 * n) w.C1 = std::min(w.C1, r);
    w.observed_min = std::min(w.observed_min, r);
    w.observed_max = std::max(w.observed_max, r);
  }
  return w;
}

/// First K eigenpairs of the Laplacian, nondecreasing, with normalized coefficients.
/// If the K-th eigenvalue is degenerate the whole level is resolved and then truncated.
inline SpectralBasis compute_spectrum(const MetricGraph& g, int K) {
  if (K < 1) throw InputError("compute_spectrum needs K >= 1");
  SpectralBasis out;
  out.graph = g;
  const int n = g.edge_count();
  const double total = total_length(g);

  // Zero modes: one constant per component without a Dirichlet vertex.
  const auto comp = g.vertex_components();
  int ncomp = 0;
  for (int c : comp) ncomp = std::max(ncomp, c + 1);
  std::vector<bool> has_dirichlet(ncomp, false);
  std::vector<double> comp_length(ncomp, 0.0);
  for (int v = 0; v < g.vertex_count(); ++v)
    if (g.vertex(v).condition == Condition::Dirichlet) has_dirichlet[comp[v]] = true;
  for (const auto& e : g.edges()) comp_length[comp[e.from]] += e.length.value;
  for (int c = 0; c < ncomp && out.K() < K; ++c) {
    if (has_dirichlet[c]) continue;
    EigenPair p;
    p.lambda = 0.0;
    p.a.assign(n, 0.0);
    p.b.assign(n, 0.0);
    for (int e = 0; e < n; ++e)
      if (comp[g.edge(e).from] == c) p.a[e] = 1.0 / std::sqrt(comp_length[c]);
    out.pairs.push_back(p);
  }
  int zero_modes = 0;
  for (int c = 0; c < ncomp; ++c) zero_modes += has_dirichlet[c] ? 0 : 1;
  for (auto& p : out.pairs) p.multiplicity = zero_modes;

  if (out.K() < K) {
    double zlo = 1e-3 * pi / total;
    const int clo = detail::eigen_count_safe(g, zlo);
    if (clo != zero_modes) throw SolverError("eigen count near zero disagrees with the zero-mode count");
    double zhi = (K + n + 2) * pi / total;
    int chi = detail::eigen_count_safe(g, zhi);
    while (chi < K) {
      zhi *= 1.5;
      chi = detail::eigen_count_safe(g, zhi);
    }
    // Split the bracket into chunks at fixed points so the result does not depend on threads.
    const int chunks = std::max(1, std::min(64, (chi - clo) / 8));
    std::vector<double> edges_z(chunks + 1);
    std::vector<int> counts(chunks + 1);
    edges_z[0] = zlo;
    counts[0] = clo;
    edges_z[chunks] = zhi;
    counts[chunks] = chi;
    for (int i = 1; i < chunks; ++i) {
      edges_z[i] = zlo + (zhi - zlo) * i / chunks;
      counts[i] = detail::eigen_count_safe(g, edges_z[i]);
    }
    for (int i = 1; i <= chunks; ++i) counts[i] = std::max(counts[i], counts[i - 1]);
    std::vector<std::vector<detail::Level>> found(chunks);
    parallel_for(chunks, [&](int i) {
      if (counts[i] >= K) return;
      detail::isolate(g, edges_z[i], edges_z[i + 1], counts[i], counts[i + 1], found[i]);
    });
    std::vector<detail::Level> levels;
    for (auto& f : found) levels.insert(levels.end(), f.begin(), f.end());

    // Eigenvectors for the levels needed to reach K.
    std::vector<detail::Level> needed;
    int have = out.K();
    for (const auto& L : levels) {
      if (have >= K) break;
      needed.push_back(L);
      have += L.multiplicity;
    }
    std::vector<double> window(needed.size());
    for (std::size_t i = 0; i < needed.size(); ++i) {
      double w = 1e-7 * std::max(1.0, needed[i].z);
      if (i > 0) w = std::min(w, 0.4 * (needed[i].z - needed[i - 1].z));
      if (i + 1 < levels.size()) w = std::min(w, 0.4 * (levels[i + 1].z - needed[i].z));
      window[i] = w;
    }
    std::vector<std::vector<Eigen::VectorXd>> vecs(needed.size());
    parallel_for(static_cast<int>(needed.size()), [&](int i) {
      needed[i].z = detail::polish_level(g, needed[i].z, needed[i].multiplicity, window[i]);
      vecs[i] = detail::level_eigenvectors(g, needed[i].z, needed[i].multiplicity);
    });
    for (std::size_t i = 0; i < needed.size(); ++i) {
      for (const auto& v : vecs[i]) {
        if (out.K() >= K) break;
        EigenPair p;
        p.lambda = needed[i].z * needed[i].z;
        p.multiplicity = needed[i].multiplicity;
        p.a.resize(n);
        p.b.resize(n);
        for (int e = 0; e < n; ++e) {
          p.a[e] = v(2 * e);
          p.b[e] = v(2 * e + 1);
        }
        out.pairs.push_back(std::move(p));
      }
    }
  }
  for (int k = 0; k < out.K(); ++k) out.pairs[k].index = k + 1;

  // Bracket check against the decoupled problems: N_GD(L) <= N_G(L) <= N_GN(L).
  const double lamK = out.pairs.back().lambda;
  if (lamK > 0.0) {
    int below = 0;
    for (const auto& p : out.pairs) below += p.lambda < lamK * (1 - 1e-12) ? 1 : 0;
    const int gd = detail::decoupled_count(g, lamK * (1 - 1e-12), false);
    const int gn = detail::decoupled_count(g, lamK * (1 - 1e-12), true);
    if (below < gd || below > gn) throw SolverError("root count outside the decoupled Weyl bracket");
  }
  out.weyl = weyl_bounds(g, out.lambdas());
  return out;
}

/// <f, g> in L2(G) from the per-edge coefficients.
inline cplx inner_product(const MetricGraph& g, const EigenPair& f, const EigenPair& h) {
  cplx s = 0.0;
  for (int e = 0; e < g.edge_count(); ++e) s += integrate(multiply(f.on_edge(e), h.on_edge(e), true), g.length(e));
  return s;
}

/// Largest violation of the vertex conditions by one eigenfunction (derivatives unscaled).
inline double vertex_residual(const MetricGraph& g, const EigenPair& p) {
  const double z = p.z();
  auto value = [&](const EdgeEnd& end) {
    const double x = end.far ? g.length(end.edge) : 0.0;
    if (z == 0.0) return p.a[end.edge] + p.b[end.edge] * x;
    return p.a[end.edge] * std::cos(z * x) + p.b[end.edge] * std::sin(z * x);
  };
  auto outgoing = [&](const EdgeEnd& end) {
    const double x = end.far ? g.length(end.edge) : 0.0;
    const double sgn = end.far ? -1.0 : 1.0;
    if (z == 0.0) return sgn * p.b[end.edge];
    return sgn * z * (-p.a[end.edge] * std::sin(z * x) + p.b[end.edge] * std::cos(z * x));
  };
  double r = 0.0;
  for (int v = 0; v < g.vertex_count(); ++v) {
    const auto& ends = g.incident(v);
    switch (g.vertex(v).condition) {
      case Condition::Dirichlet:
        for (const auto& e : ends) r = std::max(r, std::abs(value(e)));
        break;
      case Condition::Neumann:
        for (const auto& e : ends) r = std::max(r, std::abs(outgoing(e)) / std::max(1.0, z));
        break;
      case Condition::NeumannKirchhoff: {
        cplx sum = 0.0;
        for (const auto& e : ends) {
          r = std::max(r, std::abs(value(e) - value(ends[0])));
          sum += outgoing(e);
        }
        r = std::max(r, std::abs(sum) / std::max(1.0, z));
        break;
      }
    }
  }
  return r;
}

// ----- closed forms -----

enum class SpectrumFamily { IntervalDD, IntervalNN, IntervalDN, TadpoleSkew, EquilateralStar };

struct SpectrumLevel {
  double lambda;
  int multiplicity;
};

/// Analytic levels covering at least `count` eigenvalues (with multiplicity).
/// params: interval families {L}; tadpole_skew {L1}; equilateral_star {N, L} with Dirichlet leaves.
inline std::vector<SpectrumLevel> closed_form_spectrum(SpectrumFamily family, const std::vector<double>& params,
                                                       int count) {
  std::vector<SpectrumLevel> out;
  int have = 0;
  auto push = [&](double lam, int mult) {
    out.push_back({lam, mult});
    have += mult;
  };
  auto need = [&](std::size_t n) {
    if (params.size() != n) throw InputError("closed_form_spectrum: wrong parameter count");
  };
  switch (family) {
    case SpectrumFamily::IntervalDD: {
      need(1);
      for (int k = 1; have < count; ++k) push(std::pow(k * pi / params[0], 2), 1);
      break;
    }
    case SpectrumFamily::IntervalNN: {
      need(1);
      for (int k = 1; have < count; ++k) push(std::pow((k - 1) * pi / params[0], 2), 1);
      break;
    }
    case SpectrumFamily::IntervalDN: {
      need(1);
      for (int k = 1; have < count; ++k) push(std::pow((2 * k - 1) * pi / (2 * params[0]), 2), 1);
      break;
    }
    case SpectrumFamily::TadpoleSkew: {
      need(1);
      for (int k = 1; have < count; ++k) push(std::pow(2 * k * pi / params[0], 2), 1);
      break;
    }
    case SpectrumFamily::EquilateralStar: {
      need(2);
      const int N = static_cast<int>(params[0]);
      const double L = params[1];
      if (N < 2) throw InputError("equilateral star needs N >= 2");
      // cos(zL) = 0 (simple) and sin(zL) = 0 (multiplicity N-1) interleave.
      for (int m = 1; have < count; ++m) {
        if (m % 2 == 1)
          push(std::pow(m * pi / (2 * L), 2), 1);
        else
          push(std::pow(m * pi / (2 * L), 2), N - 1);
      }
      break;
    }
    default:
      throw InputError("unsupported spectrum family");
  }
  return out;
}

inline std::vector<double> expand_levels(const std::vector<SpectrumLevel>& levels, int count) {
  std::vector<double> out;
  for (const auto& l : levels)
    for (int i = 0; i < l.multiplicity && static_cast<int>(out.size()) < count; ++i) out.push_back(l.lambda);
  return out;
}

struct StarNormalization {
  double a1_squared = 0.0;
  bool degenerate_branch = false;
};

/// |a_j^1|^2 for a Dirichlet star from the continuity relation between edges:
/// 2 prod_{m != 1} s_m^2 / sum_k L_k prod_{m != k} s_m^2 with s_m = sin(sqrt(lambda_j) L_m).
inline StarNormalization star_normalization(const SpectralBasis& basis, int j) {
  const MetricGraph& g = basis.graph;
  const double z = basis.lambda(j) > 0 ? std::sqrt(basis.lambda(j)) : 0.0;
  const int n = g.edge_count();
  std::vector<double> s2(n);
  StarNormalization out;
  for (int m = 0; m < n; ++m) {
    const double s = std::sin(z * g.length(m));
    s2[m] = s * s;
    if (std::abs(s) < 1e-10) out.degenerate_branch = true;
  }
  if (out.degenerate_branch) return out;
  auto prod_except = [&](int k) {
    double p = 1.0;
    for (int m = 0; m < n; ++m)
      if (m != k) p *= s2[m];
    return p;
  };
  double den = 0.0;
  for (int k = 0; k < n; ++k) den += g.length(k) * prod_except(k);
  out.a1_squared = 2.0 * prod_except(0) / den;
  return out;
}

}  // namespace qg
