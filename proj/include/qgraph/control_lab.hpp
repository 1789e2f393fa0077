#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "qgraph/errors.hpp"
#include "qgraph/moments.hpp"
#include "qgraph/propagator.hpp"

namespace qg {

// ---- local steering -----------------------------------------------------------------------

struct SteeringProblem {
  std::vector<double> lambdas;
  Eigen::MatrixXcd B;
  double T = 0.0;
  StateVector target;
  double epsilon = 0.0;
  double s = 0.0;
  int steps = 0;  // propagator steps on [0, T]
};

/// phi_1(T) = e^{-i lambda_1 T} phi_1.
inline StateVector reference_state(const std::vector<double>& lambdas, double T) {
  return free_evolution(basis_state(static_cast<int>(lambdas.size()), 1), lambdas, T);
}

/// Enough steps that the largest relevant frequency advances at most `phase` per step.
inline int default_steps(const std::vector<double>& lambdas, double T, double phase = 0.1) {
  const double w = lambdas.back() - lambdas.front();
  return std::max(64, static_cast<int>(std::ceil(w * T / phase)));
}

/// 4 pi / delta with delta the uniform gap of the frequencies lambda_k - lambda_1.
inline double default_horizon(const std::vector<double>& lambdas) {
  std::vector<double> w;
  for (double l : lambdas) w.push_back(l - lambdas.front());
  const GapReport g = search_gap_constants(w, std::min(4, static_cast<int>(w.size()) - 2));
  if (!(g.delta > 0.0)) throw HypothesisError("no positive uniform gap for the steering frequencies");
  return 4.0 * std::numbers::pi / g.delta;
}

/// Unit-norm target with ||target - phi_1(T)||_(s) = eps, built from a random tangent direction.
inline StateVector random_tangent_target(const std::vector<double>& lambdas, double T, double eps, double s,
                                         std::uint64_t seed) {
  const int K = static_cast<int>(lambdas.size());
  const StateVector ref = reference_state(lambdas, T);
  if (eps == 0.0) return ref;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  StateVector beta(K);
  beta(0) = cplx(0.0, nd(rng));
  for (int k = 1; k < K; ++k) beta(k) = cplx(nd(rng), nd(rng)) / std::pow(k + 1.0, s);
  const StateVector dir = free_evolution(beta, lambdas, T);
  auto at = [&](double r) {
    StateVector v = ref + r * dir;
    return StateVector(v / v.norm());
  };
  auto dist = [&](double r) { return graded_norm(at(r) - ref, s); };
  // dist is increasing in r on the range used; bracket and bisect.
  double lo = 0.0, hi = eps / graded_norm(dir, s);
  while (dist(hi) < eps) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dist(mid) < eps ? lo : hi) = mid;
  }
  return at(0.5 * (lo + hi));
}

inline SteeringProblem make_steering_problem(const std::vector<double>& lambdas, const Eigen::MatrixXcd& B, double T,
                                             const StateVector& target, double eps, double s, int steps = 0) {
  if (static_cast<int>(lambdas.size()) != target.size()) throw InputError("target size does not match the basis");
  if (std::abs(target.norm() - 1.0) > 1e-12) throw InputError("target must have unit norm");
  SteeringProblem p{lambdas, B, T, target, eps, s, steps};
  if (p.steps <= 0) p.steps = default_steps(lambdas, T);
  return p;
}

struct LinearizedStep {
  ControlSignal v;
  Eigen::VectorXcd mismatch;  // interaction-frame x_k
};

/// Control v with -i int_0^T v(t) B_{k,1} e^{i(lambda_k - lambda_1)t} dt = x_k, where x is the
/// interaction-frame mismatch between `reached` and the target. The moment problem is solved
/// with frequencies lambda_k - lambda_1 and targets i x_k / B_{k,1}.
/// With `strict`, the real part of x_1 must be the second-order remainder -|x|^2/2 of a unit target.
inline LinearizedStep linearized_control(const SteeringProblem& p, const StateVector& reached, bool strict = true) {
  const int K = static_cast<int>(p.lambdas.size());
  Eigen::VectorXcd x(K);
  for (int k = 0; k < K; ++k) x(k) = std::exp(cplx(0.0, p.lambdas[k] * p.T)) * (p.target(k) - reached(k));
  double bmax = p.B.cwiseAbs().maxCoeff();
  for (int k = 0; k < K; ++k)
    if (std::abs(p.B(k, 0)) <= 1e-14 * std::max(bmax, 1e-300))
      throw HypothesisError("B_{" + std::to_string(k + 1) + ",1} vanishes");
  if (strict) {
    const double n2 = x.squaredNorm();
    if (std::abs(x(0).real()) > 0.5 * n2 * (1.0 + 1e-6) + 1e-10)
      throw InputError("target mismatch has a first-order real part on phi_1; i x_1 / B_11 is not real");
  }
  MomentProblem mp;
  mp.T = p.T;
  for (int k = 0; k < K; ++k) {
    mp.omegas.push_back(p.lambdas[k] - p.lambdas[0]);
    const cplx xk = k == 0 ? cplx(0.0, x(0).imag()) : x(k);
    mp.targets.push_back(cplx(0.0, 1.0) * xk / p.B(k, 0));
  }
  mp.targets[0] = cplx(mp.targets[0].real(), 0.0);
  return {solve_moments(mp), x};
}

inline Field as_field(const ControlSignal& s) {
  if (s.frequencies.empty()) return [](double) { return 0.0; };
  return [&s](double t) { return s(t); };
}

inline StateVector reached_state(const SteeringProblem& p, const ControlSignal& u) {
  const StateVector psi0 = basis_state(static_cast<int>(p.lambdas.size()), 1);
  return propagate(psi0, as_field(u), p.lambdas, p.B, p.T, p.steps).final_state();
}

enum class SteerStatus { Converged, Diverged, MaxIterations };

inline const char* status_name(SteerStatus s) {
  switch (s) {
    case SteerStatus::Converged: return "converged";
    case SteerStatus::Diverged: return "diverged";
    case SteerStatus::MaxIterations: return "max_iterations";
  }
  return "?";
}

struct SteerResult {
  ControlSignal u;
  std::vector<double> history;  // graded error of each evaluated control, starting with u = 0
  std::vector<double> damping;  // step scale used for entries 1..
  SteerStatus status = SteerStatus::MaxIterations;
  int iterations = 0;
  double final_error = 0.0;
  StateVector final_state;
};

inline constexpr double kSteerTolerance = 1e-6;

/// Chord iteration on the fixed horizon: u <- u + h v with v from the linearization at u = 0
/// applied to the current mismatch. h halves when the error fails to drop; two failures in a
/// row count as divergence.
inline SteerResult steer(const SteeringProblem& p, int max_iters, double tol = kSteerTolerance) {
  SteerResult r;
  r.u = zero_signal(p.T);
  StateVector reached = reached_state(p, r.u);
  double err = graded_norm(reached - p.target, p.s);
  r.history.push_back(err);
  r.final_state = reached;
  if (err <= tol) {
    r.status = SteerStatus::Converged;
    r.final_error = err;
    return r;
  }
  double h = 1.0;
  int rises = 0;
  bool first = true;
  for (int it = 0; it < max_iters; ++it) {
    LinearizedStep step;
    try {
      step = linearized_control(p, reached, first);
    } catch (const HypothesisError&) {
      r.status = SteerStatus::Diverged;
      break;
    }
    first = false;
    ControlSignal cand = r.u.empty() ? step.v : r.u;
    if (!r.u.empty()) {
      // Frequencies coincide from one iteration to the next, so coefficients add.
      for (std::size_t j = 0; j < cand.coefficients.size(); ++j) cand.coefficients[j] += h * step.v.coefficients[j];
    } else {
      for (auto& c : cand.coefficients) c *= h;
    }
    resample(cand, static_cast<int>(step.v.t.size()));
    const StateVector next = reached_state(p, cand);
    const double e = graded_norm(next - p.target, p.s);
    r.history.push_back(e);
    r.damping.push_back(h);
    r.iterations = it + 1;
    if (std::isfinite(e) && e < err) {
      r.u = cand;
      reached = next;
      err = e;
      rises = 0;
      if (err <= tol) {
        r.status = SteerStatus::Converged;
        break;
      }
    } else {
      h *= 0.5;
      if (++rises >= 2) {
        r.status = SteerStatus::Diverged;
        break;
      }
    }
  }
  r.final_error = err;
  r.final_state = reached;
  return r;
}

inline nlohmann::json to_json(const SteerResult& r) {
  return {{"status", status_name(r.status)},
          {"iterations", r.iterations},
          {"history", r.history},
          {"damping", r.damping},
          {"final_error", r.final_error}};
}

// ---- finite-dimensional Lie algebra ---------------------------------------------------------

/// (E)_{j,k} = e^{i theta}, (E)_{k,j} = -e^{-i theta}; indices 1-based.
inline Eigen::MatrixXcd lie_generator(int N1, int j, int k, double theta) {
  Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(N1, N1);
  E(j - 1, k - 1) = std::exp(cplx(0.0, theta));
  E(k - 1, j - 1) = -std::exp(cplx(0.0, -theta));
  return E;
}

struct LieGeneratorSet {
  int N1 = 0;
  std::vector<std::pair<int, int>> pairs;
  std::vector<Eigen::MatrixXcd> generators;
};

/// theta = 0 and pi/2 per pair span every E^theta_{j,k}.
inline LieGeneratorSet generators_for(int N1, const std::vector<std::pair<int, int>>& pairs) {
  LieGeneratorSet g{N1, pairs, {}};
  for (auto [j, k] : pairs) {
    if (j < 1 || k < 1 || j > N1 || k > N1 || j == k) throw InputError("generator pair out of range");
    g.generators.push_back(lie_generator(N1, j, k, 0.0));
    g.generators.push_back(lie_generator(N1, j, k, std::numbers::pi / 2));
  }
  return g;
}

namespace detail {
inline Eigen::VectorXd real_vec(const Eigen::MatrixXcd& M) {
  const Eigen::Index n = M.size();
  Eigen::VectorXd v(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = M.data()[i].real();
    v(n + i) = M.data()[i].imag();
  }
  return v;
}

/// Adds M to the orthonormal set if it is independent; returns true when added.
inline bool try_add(std::vector<Eigen::VectorXd>& onb, const Eigen::MatrixXcd& M, double tol) {
  Eigen::VectorXd v = real_vec(M);
  const double n0 = v.norm();
  if (n0 <= tol) return false;
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& q : onb) v -= q.dot(v) * q;
  if (v.norm() <= tol * n0) return false;
  onb.push_back(v / v.norm());
  return true;
}
}  // namespace detail

/// Dimension of the real Lie algebra generated by the set, by commutator closure.
inline int lie_rank(const LieGeneratorSet& g, double tol = 1e-9) {
  std::vector<Eigen::VectorXd> onb;
  std::vector<Eigen::MatrixXcd> elems;
  for (const auto& E : g.generators)
    if (detail::try_add(onb, E, tol)) elems.push_back(E);
  const int cap = g.N1 * g.N1 - 1;
  for (std::size_t a = 0; a < elems.size() && static_cast<int>(onb.size()) < cap; ++a)
    for (std::size_t b = 0; b < a && static_cast<int>(onb.size()) < cap; ++b) {
      const Eigen::MatrixXcd C = elems[a] * elems[b] - elems[b] * elems[a];
      if (detail::try_add(onb, C, tol)) elems.push_back(C);
    }
  return static_cast<int>(onb.size());
}

/// Pairs (j, k), j < k <= N1, with B_{j,k} != 0 whose gap |lambda_j - lambda_k| is not shared by
/// any other coupled pair among the first K levels.
inline std::vector<std::pair<int, int>> resonant_pairs(const std::vector<double>& lambdas, const Eigen::MatrixXcd& B,
                                                       int N1, double tol = 1e-9) {
  const int K = static_cast<int>(lambdas.size());
  if (K < N1) throw InputError("resonant_pairs needs K >= N1");
  const double bmax = B.cwiseAbs().maxCoeff();
  const double btol = tol * std::max(bmax, 1e-300);
  const double ftol = tol * std::max(1.0, std::abs(lambdas.back()));
  std::vector<std::pair<int, int>> out;
  if (bmax == 0.0) return out;
  for (int j = 0; j < N1; ++j)
    for (int k = j + 1; k < N1; ++k) {
      if (std::abs(B(j, k)) <= btol) continue;
      const double gap = std::abs(lambdas[j] - lambdas[k]);
      bool clash = false;
      for (int m = 0; m < K && !clash; ++m)
        for (int l = m + 1; l < K && !clash; ++l) {
          if (m == j && l == k) continue;
          if (std::abs(B(m, l)) <= btol) continue;
          clash = std::abs(std::abs(lambdas[m] - lambdas[l]) - gap) <= ftol;
        }
      if (!clash) out.emplace_back(j + 1, k + 1);
    }
  return out;
}

// ---- rotation factorization -----------------------------------------------------------------

struct Rotation {
  int j = 0, k = 0;
  double theta = 0.0;
  double alpha = 0.0;
  /// e^{alpha E}: identity outside the (j,k) plane since E^2 = -1 on it.
  Eigen::MatrixXcd matrix(int N1) const {
    Eigen::MatrixXcd R = Eigen::MatrixXcd::Identity(N1, N1);
    R(j - 1, j - 1) = R(k - 1, k - 1) = std::cos(alpha);
    R(j - 1, k - 1) = std::exp(cplx(0.0, theta)) * std::sin(alpha);
    R(k - 1, j - 1) = -std::exp(cplx(0.0, -theta)) * std::sin(alpha);
    return R;
  }
};

namespace detail {
/// Apply e^{alpha E^theta_{j,k}} in place (closed form, E^2 = -1 on the (j,k) plane).
inline void rotate(Eigen::VectorXcd& v, const Rotation& r) {
  const cplx a = v(r.j - 1), b = v(r.k - 1);
  const double c = std::cos(r.alpha), s = std::sin(r.alpha);
  v(r.j - 1) = c * a + std::exp(cplx(0.0, r.theta)) * s * b;
  v(r.k - 1) = -std::exp(cplx(0.0, -r.theta)) * s * a + c * b;
}
}  // namespace detail

inline Eigen::VectorXcd apply_rotations(const std::vector<Rotation>& seq, Eigen::VectorXcd v) {
  for (const auto& r : seq) detail::rotate(v, r);
  return v;
}

/// Rotations e^{alpha_l E^{theta_l}_{j_l,k_l}} over the admissible pairs whose product, applied
/// in order, maps e_1 to `target`. Needs the pair graph to connect every level to level 1.
inline std::vector<Rotation> rotation_factorization(int N1, const std::vector<std::pair<int, int>>& pairs,
                                                    const Eigen::VectorXcd& target) {
  if (target.size() != N1 || std::abs(target.norm() - 1.0) > 1e-12) throw InputError("target must be a unit vector of size N1");
  std::vector<std::vector<int>> adj(N1 + 1);
  for (auto [j, k] : pairs) {
    adj[j].push_back(k);
    adj[k].push_back(j);
  }
  std::vector<int> parent(N1 + 1, 0), order;
  std::vector<bool> seen(N1 + 1, false);
  std::queue<int> q;
  q.push(1);
  seen[1] = true;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    order.push_back(v);
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = true;
        parent[w] = v;
        q.push(w);
      }
  }
  if (static_cast<int>(order.size()) != N1) throw HypothesisError("admissible pairs do not connect all levels");

  // Reduce the target to e_1 leaves-first, then undo in reverse order.
  Eigen::VectorXcd v = target;
  std::vector<Rotation> reduce;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int c = *it;
    if (c == 1) continue;
    const int pa = parent[c];
    const cplx a = v(pa - 1), b = v(c - 1);
    if (std::abs(b) == 0.0) continue;
    Rotation r{pa, c, std::arg(a) - std::arg(b), std::atan2(std::abs(b), std::abs(a))};
    detail::rotate(v, r);
    v(c - 1) = 0.0;
    reduce.push_back(r);
  }
  // v = e^{i g} e_1: two quarter turns through a neighbour of 1 remove the phase.
  const double g = std::arg(v(0));
  if (std::abs(g) > 1e-15) {
    if (adj[1].empty()) throw HypothesisError("level 1 has no admissible partner");
    const int n = adj[1].front();
    const double pi = std::numbers::pi;
    // e_1 -> -e^{-i t1} e_n -> e^{i(t2 - t1)} e_1 with alpha = pi/2; choose t2 - t1 = pi - g.
    Rotation r1{1, n, 0.0, pi / 2}, r2{1, n, pi - g, pi / 2};
    detail::rotate(v, r1);
    detail::rotate(v, r2);
    reduce.push_back(r1);
    reduce.push_back(r2);
  }
  std::vector<Rotation> build;
  for (auto it = reduce.rbegin(); it != reduce.rend(); ++it) build.push_back({it->j, it->k, it->theta, -it->alpha});
  return build;
}

}  // namespace qg
