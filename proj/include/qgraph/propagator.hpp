#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "qgraph/edge_integrals.hpp"
#include "qgraph/errors.hpp"

namespace qg {

using Field = std::function<double(double)>;

/// Coefficients <psi, phi_k>, k = 1..K.
using StateVector = Eigen::VectorXcd;

inline StateVector basis_state(int K, int k) {
  StateVector v = StateVector::Zero(K);
  v(k - 1) = 1.0;
  return v;
}

/// (sum_k |k^s psi_k|^2)^(1/2).
inline double graded_norm(const StateVector& psi, double s) {
  double acc = 0.0;
  for (int k = 0; k < psi.size(); ++k) acc += std::norm(psi(k)) * std::pow(k + 1.0, 2 * s);
  return std::sqrt(acc);
}

/// Shift applied to the operator before taking powers: 1 when 0 is an eigenvalue, else 0.
inline double spectral_shift(const std::vector<double>& lambdas) {
  return !lambdas.empty() && std::abs(lambdas[0]) < 1e-12 ? 1.0 : 0.0;
}

/// (sum_k |(lambda_k + c)^(s/2) psi_k|^2)^(1/2) with c from spectral_shift.
inline double operator_norm(const StateVector& psi, const std::vector<double>& lambdas, double s) {
  const double c = spectral_shift(lambdas);
  double acc = 0.0;
  for (int k = 0; k < psi.size(); ++k) acc += std::norm(psi(k)) * std::pow(lambdas[k] + c, s);
  return std::sqrt(acc);
}

/// exp(-i dt (diag(lambda) + u B)); dt may be negative. A real B takes the real symmetric path.
inline Eigen::MatrixXcd step_propagator(const std::vector<double>& lambdas, const Eigen::MatrixXcd& B, double u, double dt) {
  const int K = static_cast<int>(lambdas.size());
  Eigen::VectorXcd ph(K);
  if (B.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::MatrixXd H = u * B.real();
    for (int k = 0; k < K; ++k) H(k, k) += lambdas[k];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) throw SolverError("eigendecomposition failed in propagator");
    for (int k = 0; k < K; ++k) ph(k) = std::exp(cplx(0.0, -dt * es.eigenvalues()(k)));
    const Eigen::MatrixXcd V = es.eigenvectors().cast<cplx>();
    return V * ph.asDiagonal() * V.transpose();
  }
  Eigen::MatrixXcd H = u * B;
  for (int k = 0; k < K; ++k) H(k, k) += lambdas[k];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  if (es.info() != Eigen::Success) throw SolverError("eigendecomposition failed in propagator");
  for (int k = 0; k < K; ++k) ph(k) = std::exp(cplx(0.0, -dt * es.eigenvalues()(k)));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

struct Trajectory {
  std::vector<double> t;
  std::vector<StateVector> psi;
  std::vector<double> u;  // control value used on step n (from t[n] to t[n+1])
  double norm_drift = 0.0;
  double tail_mass = 0.0;
  bool truncation_warning = false;
  const StateVector& final_state() const { return psi.back(); }
};

struct PropagateOptions {
  bool backward = false;           // start from psi0 at time T and step down to 0
  double tail_threshold = 1e-6;    // mass in the top quarter of modes that raises the warning
};

inline double tail_fraction(const StateVector& psi) {
  const int K = static_cast<int>(psi.size());
  const int from = K - K / 4;
  double m = 0.0;
  for (int k = from; k < K; ++k) m += std::norm(psi(k));
  return m;
}

/// Piecewise-constant control, u sampled at step midpoints; each step uses the exact exponential.
inline Trajectory propagate(const StateVector& psi0, const Field& u, const std::vector<double>& lambdas,
                            const Eigen::MatrixXcd& B, double T, int steps, const PropagateOptions& opt = {}) {
  const int K = static_cast<int>(lambdas.size());
  if (steps < 1) throw InputError("propagate needs steps >= 1");
  if (psi0.size() != K || B.rows() != K || B.cols() != K) throw InputError("propagate: dimension mismatch");
  if (!(T > 0.0)) throw InputError("propagate needs T > 0");
  const double dt = T / steps;
  Trajectory tr;
  tr.t.reserve(steps + 1);
  tr.psi.reserve(steps + 1);
  StateVector psi = psi0;
  const double n0 = psi0.norm();
  auto record = [&](double t) {
    tr.t.push_back(t);
    tr.psi.push_back(psi);
    tr.norm_drift = std::max(tr.norm_drift, std::abs(psi.norm() - n0));
    tr.tail_mass = std::max(tr.tail_mass, tail_fraction(psi));
  };
  record(opt.backward ? T : 0.0);
  Eigen::MatrixXcd U;
  double u_cached = std::numeric_limits<double>::quiet_NaN();
  for (int n = 0; n < steps; ++n) {
    const int idx = opt.backward ? steps - 1 - n : n;
    const double um = u((idx + 0.5) * dt);
    if (!(um == u_cached)) {
      U = step_propagator(lambdas, B, um, opt.backward ? -dt : dt);
      u_cached = um;
    }
    psi = U * psi;
    tr.u.push_back(um);
    record(opt.backward ? (idx == 0 ? 0.0 : idx * dt) : (n + 1 == steps ? T : (n + 1) * dt));
  }
  tr.truncation_warning = tr.tail_mass > opt.tail_threshold;
  return tr;
}

/// Free evolution e^{-i A t} psi.
inline StateVector free_evolution(const StateVector& psi, const std::vector<double>& lambdas, double t) {
  StateVector out = psi;
  for (int k = 0; k < out.size(); ++k) out(k) *= std::exp(cplx(0.0, -lambdas[k] * t));
  return out;
}

/// int_a^b (f0 + (f1 - f0)(s - a)/(b - a)) e^{i w s} ds.
inline cplx filon_linear(cplx f0, cplx f1, double w, double a, double b) {
  const double h = b - a;
  const double th = w * h;
  const cplx ea = std::exp(cplx(0.0, w * a));
  if (std::abs(th) < 1e-3) {
    // Series of int_0^1 (f0 + (f1-f0) x) e^{i th x} dx.
    const cplx i_th(0.0, th);
    const cplx m0 = 1.0 + i_th / 2.0 + i_th * i_th / 6.0 + i_th * i_th * i_th / 24.0;
    const cplx m1 = 0.5 + i_th / 3.0 + i_th * i_th / 8.0 + i_th * i_th * i_th / 30.0;
    return ea * h * (f0 * m0 + (f1 - f0) * m1);
  }
  const cplx e = std::exp(cplx(0.0, th));
  const cplx I = cplx(0.0, 1.0);
  const cplx m0 = (e - 1.0) / (I * th);
  const cplx m1 = e / (I * th) + (e - 1.0) / (th * th);
  return ea * h * (f0 * m0 + (f1 - f0) * m1);
}

/// max_n || psi(t_n) - e^{-iAt_n} psi0 + i int_0^{t_n} e^{-iA(t_n - s)} u(s) B psi(s) ds ||.
/// Evaluated in the interaction frame phi = e^{iAs} psi, with u(s) phi_j(s) linear on each
/// snapshot interval and the oscillating factors e^{i(l_k - l_j)s} integrated exactly.
inline double duhamel_residual(const Trajectory& tr, const Field& u, const std::vector<double>& lambdas,
                               const Eigen::MatrixXcd& B) {
  const int K = static_cast<int>(lambdas.size());
  const int n = static_cast<int>(tr.t.size());
  if (n < 2) return 0.0;
  const bool forward = tr.t.back() > tr.t.front();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = forward ? i : n - 1 - i;
  auto phi = [&](int i) {
    StateVector p = tr.psi[i];
    for (int k = 0; k < K; ++k) p(k) *= std::exp(cplx(0.0, lambdas[k] * tr.t[i]));
    return p;
  };
  const int i0 = order[0];
  const StateVector phi0 = phi(i0);
  StateVector integral = StateVector::Zero(K);
  StateVector prev = phi0;
  double up = u(tr.t[i0]);
  double worst = 0.0;
  for (int s = 1; s < n; ++s) {
    const int ia = order[s - 1], ib = order[s];
    const double a = tr.t[ia], b = tr.t[ib];
    const StateVector cur = phi(ib);
    const double uc = u(b);
    for (int k = 0; k < K; ++k) {
      cplx acc = 0.0;
      for (int j = 0; j < K; ++j) {
        if (B(k, j) == cplx(0.0)) continue;
        acc += B(k, j) * filon_linear(up * prev(j), uc * cur(j), lambdas[k] - lambdas[j], a, b);
      }
      integral(k) += acc;
    }
    const StateVector r = cur - phi0 + cplx(0.0, 1.0) * integral;
    worst = std::max(worst, r.norm());
    prev = cur;
    up = uc;
  }
  return worst;
}

inline nlohmann::json summary_json(const Trajectory& tr, double residual) {
  return {{"norm_drift", tr.norm_drift},
          {"tail_mass", tr.tail_mass},
          {"truncation_warning", tr.truncation_warning},
          {"residual", residual},
          {"steps", static_cast<int>(tr.t.size()) - 1}};
}

/// CSV rows t, Re psi_1, Im psi_1, ..., every `stride` snapshots.
inline void write_trajectory_csv(const Trajectory& tr, const std::string& path, int stride = 1) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw InputError("cannot write '" + path + "'");
  const int K = tr.psi.empty() ? 0 : static_cast<int>(tr.psi[0].size());
  std::fprintf(f, "t");
  for (int k = 1; k <= K; ++k) std::fprintf(f, ",re%d,im%d", k, k);
  std::fprintf(f, "\n");
  for (std::size_t i = 0; i < tr.t.size(); i += std::max(1, stride)) {
    std::fprintf(f, "%.17g", tr.t[i]);
    for (int k = 0; k < K; ++k) std::fprintf(f, ",%.17g,%.17g", tr.psi[i](k).real(), tr.psi[i](k).imag());
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

}  // namespace qg
