#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "qgraph/edge_integrals.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/gaps.hpp"
#include "qgraph/parallel.hpp"

namespace qg {

// ---- divided-difference blocks ------------------------------------------------------------

struct DividedDifferenceBlock {
  int m = 0;
  int first = 1;  // 1-based index of the first node in the full sequence
  std::vector<double> nodes;
  Eigen::MatrixXd F;

  int size() const { return static_cast<int>(nodes.size()); }

  /// Newton-form inverse: (F^-1)_{j,k} = prod_{l<j} (h_k - h_l) for j <= k.
  Eigen::MatrixXd inverse() const {
    const int n = size();
    Eigen::MatrixXd I = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k)
      for (int j = 0; j <= k; ++j) {
        double p = 1.0;
        for (int l = 0; l < j; ++l) p *= nodes[k] - nodes[l];
        I(j, k) = p;
      }
    return I;
  }
};

/// F_{j,k} = prod_{l != j, l <= k} (h_j - h_l)^-1 for j <= k.
inline Eigen::MatrixXd divided_difference_matrix(const std::vector<double>& h) {
  const int n = static_cast<int>(h.size());
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j <= k; ++j) {
      double p = 1.0;
      for (int l = 0; l <= k; ++l) {
        if (l == j) continue;
        const double d = h[j] - h[l];
        if (d == 0.0) throw InputError("coincident nodes inside a class");
        p *= d;
      }
      F(j, k) = 1.0 / p;
    }
  return F;
}

inline std::vector<DividedDifferenceBlock> build_blocks(const std::vector<double>& lambdas, const ClassPartition& part) {
  std::vector<DividedDifferenceBlock> out;
  int expect = 1;
  for (std::size_t m = 0; m < part.classes.size(); ++m) {
    const auto [a, b] = part.classes[m];
    if (a != expect || b < a || b > static_cast<int>(lambdas.size()))
      throw InputError("partition does not match the sequence");
    expect = b + 1;
    DividedDifferenceBlock blk;
    blk.m = static_cast<int>(m) + 1;
    blk.first = a;
    blk.nodes.assign(lambdas.begin() + (a - 1), lambdas.begin() + b);
    blk.F = divided_difference_matrix(blk.nodes);
    out.push_back(std::move(blk));
  }
  if (expect != static_cast<int>(lambdas.size()) + 1) throw InputError("partition does not cover the sequence");
  return out;
}

inline Eigen::VectorXcd apply_F(const std::vector<DividedDifferenceBlock>& blocks, const Eigen::VectorXcd& x) {
  int n = 0;
  for (const auto& b : blocks) n += b.size();
  if (x.size() != n) throw InputError("apply_F: length mismatch");
  Eigen::VectorXcd y(n);
  for (const auto& b : blocks)
    y.segment(b.first - 1, b.size()) = b.F.cast<cplx>() * x.segment(b.first - 1, b.size());
  return y;
}

inline Eigen::VectorXcd apply_F_inverse(const std::vector<DividedDifferenceBlock>& blocks, const Eigen::VectorXcd& x) {
  Eigen::VectorXcd y(x.size());
  for (const auto& b : blocks)
    y.segment(b.first - 1, b.size()) = b.inverse().cast<cplx>() * x.segment(b.first - 1, b.size());
  return y;
}

/// Block-diagonal F as one dense matrix.
inline Eigen::MatrixXd dense_F(const std::vector<DividedDifferenceBlock>& blocks) {
  int n = 0;
  for (const auto& b : blocks) n += b.size();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (const auto& b : blocks) D.block(b.first - 1, b.first - 1, b.size(), b.size()) = b.F;
  return D;
}

/// C3 = max_m trace(F_m^T F_m) / min_{l in E_m} l^(2 d_tilde), so that
/// ||F x|| <= sqrt(C3) ||x||_{h^d_tilde} with ||x||_{h^d}^2 = sum |k^d x_k|^2.
inline double block_trace_bound(const std::vector<DividedDifferenceBlock>& blocks, double d_tilde) {
  double c = 0.0;
  for (const auto& b : blocks) c = std::max(c, b.F.squaredNorm() / std::pow(static_cast<double>(b.first), 2 * d_tilde));
  return c;
}

inline double h_norm(const Eigen::VectorXcd& x, double d) {
  double s = 0.0;
  for (int k = 0; k < x.size(); ++k) s += std::norm(x(k)) * std::pow(k + 1.0, 2 * d);
  return std::sqrt(s);
}

// ---- moment problems ----------------------------------------------------------------------

/// Find real u on (0, T) with int_0^T u(t) e^{i w_k t} dt = x_k.
struct MomentProblem {
  std::vector<double> omegas;  // increasing, nonnegative
  std::vector<cplx> targets;
  double T = 1.0;
};

struct ControlSignal {
  double T = 0.0;
  std::vector<double> frequencies;  // extended list, u(t) = sum_j c_j e^{-i lambda_j t}
  std::vector<cplx> coefficients;
  std::vector<double> t;
  std::vector<double> u;
  double max_imag = 0.0;
  double residual = 0.0;
  double cond = 1.0;
  bool jitter_used = false;
  std::vector<std::string> warnings;

  cplx evaluate_complex(double s) const {
    cplx v = 0.0;
    for (std::size_t j = 0; j < frequencies.size(); ++j) v += coefficients[j] * std::exp(cplx(0.0, -frequencies[j] * s));
    return v;
  }
  double operator()(double s) const { return evaluate_complex(s).real(); }
  bool empty() const { return frequencies.empty(); }

  /// Pointwise sum of two signals on the same horizon (coefficient lists are concatenated).
  ControlSignal plus(const ControlSignal& o, double scale = 1.0) const;
};

/// Zero control on [0, T].
inline ControlSignal zero_signal(double T, int samples = 2) {
  ControlSignal s;
  s.T = T;
  for (int i = 0; i < samples; ++i) {
    s.t.push_back(T * i / (samples - 1));
    s.u.push_back(0.0);
  }
  return s;
}

inline void resample(ControlSignal& s, int samples) {
  samples = std::max(samples, 2);
  s.t.resize(samples);
  s.u.resize(samples);
  s.max_imag = 0.0;
  for (int i = 0; i < samples; ++i) {
    s.t[i] = s.T * i / (samples - 1);
    const cplx v = s.evaluate_complex(s.t[i]);
    s.u[i] = v.real();
    s.max_imag = std::max(s.max_imag, std::abs(v.imag()));
  }
}

inline ControlSignal ControlSignal::plus(const ControlSignal& o, double scale) const {
  if (T != o.T) throw InputError("signals on different horizons");
  ControlSignal s = *this;
  for (std::size_t j = 0; j < o.frequencies.size(); ++j) {
    s.frequencies.push_back(o.frequencies[j]);
    s.coefficients.push_back(scale * o.coefficients[j]);
  }
  s.warnings.clear();
  resample(s, static_cast<int>(std::max(t.size(), o.t.size())));
  return s;
}

/// int_0^T e^{i d t} dt.
inline cplx exp_integral(double d, double T) { return std::exp(cplx(0.0, 0.5 * d * T)) * T * sinc(0.5 * d * T); }

/// G_{kj} = int_0^T e^{i(l_k - l_j)t} dt, Hermitian positive definite for distinct frequencies.
inline Eigen::MatrixXcd exponential_gram(const std::vector<double>& lambdas, double T) {
  const int n = static_cast<int>(lambdas.size());
  Eigen::MatrixXcd G(n, n);
  parallel_for(n, [&](int k) {
    for (int j = 0; j < n; ++j) G(k, j) = exp_integral(lambdas[k] - lambdas[j], T);
  });
  return G;
}

inline constexpr double kGramCondLimit = 1e12;

struct ExtendedProblem {
  std::vector<double> lambdas;
  std::vector<cplx> targets;
  std::vector<int> mirror;  // index of the conjugate partner
  std::vector<int> source;  // original index for the nonnegative half, -1 otherwise
};

/// {-w_K..-w_1, w_1..w_K} with conjugate targets; a zero frequency appears once.
inline ExtendedProblem extend_symmetric(const MomentProblem& p) {
  const int K = static_cast<int>(p.omegas.size());
  const bool zero = K > 0 && p.omegas[0] == 0.0;
  ExtendedProblem e;
  for (int k = K - 1; k >= (zero ? 1 : 0); --k) {
    e.lambdas.push_back(-p.omegas[k]);
    e.targets.push_back(std::conj(p.targets[k]));
    e.source.push_back(-1);
  }
  for (int k = 0; k < K; ++k) {
    e.lambdas.push_back(p.omegas[k]);
    e.targets.push_back(p.targets[k]);
    e.source.push_back(k);
  }
  const int n = static_cast<int>(e.lambdas.size());
  e.mirror.assign(n, -1);
  for (int i = 0; i < n; ++i) e.mirror[i] = n - 1 - i;
  return e;
}

inline ControlSignal solve_moments(const MomentProblem& p, int min_samples = 0) {
  const int K = static_cast<int>(p.omegas.size());
  if (K == 0 || static_cast<int>(p.targets.size()) != K) throw InputError("moment problem: size mismatch");
  if (!(p.T > 0.0)) throw InputError("moment problem: T must be positive");
  for (int k = 0; k < K; ++k) {
    if (p.omegas[k] < 0.0) throw InputError("moment problem: negative frequency");
    if (k > 0 && !(p.omegas[k] > p.omegas[k - 1])) throw InputError("moment problem: frequencies not distinct and increasing");
  }
  double scale = 0.0;
  for (const auto& x : p.targets) scale = std::max(scale, std::abs(x));
  if (p.omegas[0] == 0.0 && std::abs(p.targets[0].imag()) > 1e-14 * std::max(1.0, scale))
    throw InputError("moment problem: target for the zero frequency must be real");

  ControlSignal s;
  s.T = p.T;
  const ExtendedProblem e = extend_symmetric(p);
  const int n = static_cast<int>(e.lambdas.size());
  if (n >= 3) {
    const GapReport gr = search_gap_constants(e.lambdas, std::min(4, n - 2));
    if (gr.delta > 0.0 && p.T <= 2.0 * std::numbers::pi / gr.delta)
      s.warnings.push_back("T = " + std::to_string(p.T) + " is not above 2*pi/delta = " +
                           std::to_string(2.0 * std::numbers::pi / gr.delta));
  }

  const Eigen::MatrixXcd G = exponential_gram(e.lambdas, p.T);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Eigen::EigenvaluesOnly);
  const double emin = es.eigenvalues()(0), emax = es.eigenvalues()(n - 1);
  s.cond = emin > 0.0 ? emax / emin : std::numeric_limits<double>::infinity();
  if (!(s.cond <= kGramCondLimit))
    throw HypothesisError("Gram matrix condition number " + std::to_string(s.cond) +
                          " exceeds 1e12; horizon too short or frequencies nearly resonant");

  Eigen::VectorXcd rhs(n);
  for (int i = 0; i < n; ++i) rhs(i) = e.targets[i];
  Eigen::LLT<Eigen::MatrixXcd> llt(G);
  Eigen::VectorXcd c;
  if (llt.info() == Eigen::Success) {
    c = llt.solve(rhs);
  } else {
    const double jitter = 1e-12 * G.trace().real() / n;
    Eigen::MatrixXcd Gj = G;
    Gj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXcd> llt2(Gj);
    if (llt2.info() != Eigen::Success) throw SolverError("Gram factorization failed after jitter");
    c = llt2.solve(rhs);
    s.jitter_used = true;
  }
  // Exact conjugate symmetry of the coefficients makes u real to rounding.
  Eigen::VectorXcd cs(n);
  for (int i = 0; i < n; ++i) cs(i) = 0.5 * (c(i) + std::conj(c(e.mirror[i])));

  const Eigen::VectorXcd moments = G * cs;
  double r2 = 0.0;
  for (int i = 0; i < n; ++i)
    if (e.source[i] >= 0) r2 += std::norm(moments(i) - p.targets[e.source[i]]);
  s.residual = std::sqrt(r2);

  s.frequencies = e.lambdas;
  s.coefficients.assign(cs.data(), cs.data() + n);
  resample(s, std::max(32 * K, min_samples));
  return s;
}

/// Analytic moments int_0^T u(t) e^{i w t} dt of an exponential-sum signal.
inline std::vector<cplx> signal_moments(const ControlSignal& s, const std::vector<double>& omegas) {
  std::vector<cplx> out(omegas.size());
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    cplx v = 0.0;
    for (std::size_t j = 0; j < s.frequencies.size(); ++j) v += s.coefficients[j] * exp_integral(omegas[k] - s.frequencies[j], s.T);
    out[k] = v;
  }
  return out;
}

/// L2(0,T) norm of an exponential-sum signal.
inline double signal_l2_norm(const ControlSignal& s) {
  if (s.frequencies.empty()) return 0.0;
  const Eigen::MatrixXcd G = exponential_gram(s.frequencies, s.T);
  Eigen::Map<const Eigen::VectorXcd> c(s.coefficients.data(), static_cast<Eigen::Index>(s.coefficients.size()));
  return std::sqrt(std::max(0.0, (c.adjoint() * G * c)(0, 0).real()));
}

// ---- moment bound ---------------------------------------------------------------------------

/// ||(int_0^T e^{i l_k s} g(s) ds)_k|| / ||g||_{L2(0,T)} for g = sum_j a_j e^{-i l_j s}.
inline double moment_ratio(const std::vector<double>& lambdas, double T, const Eigen::VectorXcd& a) {
  const Eigen::MatrixXcd G = exponential_gram(lambdas, T);
  const Eigen::VectorXcd m = G * a;
  const double g2 = (a.adjoint() * G * a)(0, 0).real();
  return m.norm() / std::sqrt(g2);
}

struct MomentBoundLadder {
  std::vector<double> T;
  std::vector<double> own;     // max over trials drawn on (0, T_i)
  std::vector<double> C;       // max over own trials and zero-extended trials of smaller horizons
};

/// Empirical moment constant over random band-limited trials on (0, T).
inline double moment_bound_constant(const std::vector<double>& lambdas, double T, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const int K = static_cast<int>(lambdas.size());
  double best = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXcd a(K);
    for (int k = 0; k < K; ++k) a(k) = cplx(nd(rng), nd(rng));
    best = std::max(best, moment_ratio(lambdas, T, a));
  }
  return best;
}

/// A trial g on (0, T_1) extended by zero to (0, T_2) keeps its moments and norm, so every
/// trial set of a shorter horizon is also a trial set of the longer one.
inline MomentBoundLadder moment_bound_ladder(const std::vector<double>& lambdas, const std::vector<double>& Ts, int trials,
                                             std::uint64_t seed) {
  MomentBoundLadder out;
  double carried = 0.0;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    if (i > 0 && !(Ts[i] > Ts[i - 1])) throw InputError("horizons must increase");
    const double own = moment_bound_constant(lambdas, Ts[i], trials, seed + i);
    carried = std::max(carried, own);
    out.T.push_back(Ts[i]);
    out.own.push_back(own);
    out.C.push_back(carried);
  }
  return out;
}

// ---- export ---------------------------------------------------------------------------------

inline nlohmann::json to_json(const ControlSignal& s) {
  nlohmann::json j;
  j["T"] = s.T;
  j["frequencies"] = s.frequencies;
  j["coefficients"] = nlohmann::json::array();
  for (const auto& c : s.coefficients) j["coefficients"].push_back({c.real(), c.imag()});
  j["residual"] = s.residual;
  j["cond"] = s.cond;
  j["max_imag"] = s.max_imag;
  j["jitter_used"] = s.jitter_used;
  j["warnings"] = s.warnings;
  return j;
}

inline void write_signal_csv(const ControlSignal& s, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw InputError("cannot write '" + path + "'");
  std::fprintf(f, "t,u\n");
  for (std::size_t i = 0; i < s.t.size(); ++i) std::fprintf(f, "%.17g,%.17g\n", s.t[i], s.u[i]);
  std::fclose(f);
}

}  // namespace qg
