#pragma once

#include <array>
#include <map>
#include <numbers>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "oracle.hpp"

namespace kerrloss {

enum class PropagationMethod { Auto, DenseExponential, Taylor, Adaptive };

struct NoiseConfig {
  int n_max = 12;
  PropagationMethod method = PropagationMethod::Auto;
  IntegratorConfig ode{};
  double boundary_threshold = 1e-9;
  bool check_truncation = true;
  int n_max_cap = 128;  // per-J escalation limit when the boundary gate fails
  double n_max_growth = 1.5;
  bool mirror_negative_J = true;  // Z(-J) = conj Z(J) for Hermitian initial states
};

// Constant sources J+ = J- = J/2 acting through V+ (left) and V- (right).
struct SourceConvention {
  static cplx drive(double J) { return kI * (J / 2.0); }

  // max deviation of V+- = (Vo +- Vx)/2 and V+ + V- = Vo over basis matrices
  static double invariant_deviation(const Truncation& t) {
    const int d = t.dim();
    CMatrix x = CMatrix::Zero(d, d);
    double worst = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        x(i, j) = 1.0;
        CMatrix anti = apply_source(Superscript::Anti, x), comm = apply_source(Superscript::Comm, x);
        CMatrix plus = apply_source(Superscript::Plus, x), minus = apply_source(Superscript::Minus, x);
        worst = std::max({worst, detail::max_abs(CMatrix(plus - 0.5 * (anti + comm))),
                          detail::max_abs(CMatrix(minus - 0.5 * (anti - comm))),
                          detail::max_abs(CMatrix(plus + minus - anti))});
        x(i, j) = 0.0;
      }
    return worst;
  }
};

inline double boundary_magnitude(const CMatrix& xi) {
  const int n = static_cast<int>(xi.rows()) - 1;
  return std::max(xi.row(n).cwiseAbs().maxCoeff(), xi.col(n).cwiseAbs().maxCoeff());
}

// Propagator for the source-driven generator with a J-independent step plan.
class DrivenEvolution {
 public:
  DrivenEvolution(const ModelParams& p, double J, const Truncation& t, const NoiseConfig& cfg, double plan_J)
      : gen_(p, SourceConvention::drive(J)), trunc_(t), cfg_(cfg),
        norm_(Generator(p, SourceConvention::drive(std::max(std::abs(J), std::abs(plan_J)))).norm_bound(t.n_max())) {}

  CMatrix advance(const CMatrix& x, double dt) {
    if (dt == 0.0) return x;
    switch (choose(dt)) {
      case PropagationMethod::DenseExponential: {
        auto it = expm_.find(dt);
        if (it == expm_.end()) {
          if (dense_.size() == 0) dense_ = gen_.dense(trunc_);
          it = expm_.emplace(dt, matrix_exponential(dense_, dt)).first;
        }
        CVector v = it->second * Eigen::Map<const CVector>(x.data(), x.size());
        return Eigen::Map<const CMatrix>(v.data(), x.rows(), x.cols());
      }
      case PropagationMethod::Adaptive: {
        LinearAction act = [this](const CMatrix& a, CMatrix& b) { gen_.apply(a, b); };
        return ode_propagate(act, x, dt, cfg_.ode);
      }
      default: {
        LinearAction act = [this](const CMatrix& a, CMatrix& b) { gen_.apply(a, b); };
        return taylor_propagate(act, x, dt, norm_);
      }
    }
  }

  PropagationMethod choose(double dt) const {
    if (cfg_.method != PropagationMethod::Auto) return cfg_.method;
    const double n2 = static_cast<double>(trunc_.dim()) * trunc_.dim();
    if (n2 > 2500) return PropagationMethod::Taylor;
    double taylor = std::ceil(norm_ * dt / 2.0) * 22.0 * n2 * 12.0;
    double squarings = std::max(0.0, std::log2(norm_ * dt / 0.5));
    double dense = (squarings + 8.0) * n2 * n2 * n2 * 8.0 + n2 * n2 * 40.0;
    return dense < taylor ? PropagationMethod::DenseExponential : PropagationMethod::Taylor;
  }

 private:
  Generator gen_;
  Truncation trunc_;
  NoiseConfig cfg_;
  double norm_;
  CMatrix dense_;
  std::map<double, CMatrix> expm_;
};

namespace detail {

inline void check_truncation(const CMatrix& xi, const NoiseConfig& cfg, double J, double t) {
  if (!cfg.check_truncation) return;
  double b = boundary_magnitude(xi);
  if (!(b <= cfg.boundary_threshold))
    throw TruncationError("truncation not converged: boundary magnitude " + std::to_string(b) + " at J=" +
                          std::to_string(J) + ", t=" + std::to_string(t) + ", n_max=" +
                          std::to_string(xi.rows() - 1));
}

inline void check_initial(const FockState& initial, const NoiseConfig& cfg) {
  if (initial.truncation().n_max() != cfg.n_max)
    throw ValidationError("initial state truncation does not match noise n_max");
}

}  // namespace detail

inline FockState xi_evolve(const ModelParams& p, double J, double t, const FockState& initial, const NoiseConfig& cfg) {
  detail::check_initial(initial, cfg);
  if (t < 0.0) throw ValidationError("xi_evolve: negative time");
  DrivenEvolution ev(p, J, initial.truncation(), cfg, J);
  CMatrix xi = ev.advance(initial.matrix(), t);
  detail::check_truncation(xi, cfg, J, t);
  return FockState(initial.truncation(), std::move(xi), false);
}

// Z[j][i] = tr xi_{J_j}(t_i); one propagation per J covers all times.
inline std::vector<std::vector<cplx>> generating_function_trace(const ModelParams& p, const FockState& initial,
                                                                const std::vector<double>& times,
                                                                const std::vector<double>& J_values,
                                                                const NoiseConfig& cfg) {
  detail::check_initial(initial, cfg);
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] < 0.0 || (i > 0 && times[i] < times[i - 1]))
      throw ValidationError("generating_function: times must be non-negative and increasing");
  double plan = 0.0;
  for (double J : J_values) plan = std::max(plan, std::abs(J));
  const bool mirror = cfg.mirror_negative_J && initial.hermiticity_deviation() <= 1e-12;

  std::vector<std::vector<cplx>> Z(J_values.size());
  std::map<double, std::size_t> done;
  for (std::size_t j = 0; j < J_values.size(); ++j) {
    const double J = J_values[j];
    if (mirror) {
      auto it = done.find(-J);
      if (it != done.end()) {
        Z[j] = Z[it->second];
        for (auto& z : Z[j]) z = std::conj(z);
        continue;
      }
    }
    int n = cfg.n_max;
    for (;;) {
      Truncation tr(n);
      DrivenEvolution ev(p, J, tr, cfg, plan);
      CMatrix xi = CMatrix::Zero(tr.dim(), tr.dim());
      xi.topLeftCorner(initial.truncation().dim(), initial.truncation().dim()) = initial.matrix();
      double prev = 0.0;
      std::vector<cplx> row;
      row.reserve(times.size());
      bool ok = true;
      for (double t : times) {
        xi = ev.advance(xi, t - prev);
        prev = t;
        if (cfg.check_truncation && !(boundary_magnitude(xi) <= cfg.boundary_threshold)) {
          if (n < cfg.n_max_cap) {
            ok = false;
            break;
          }
          detail::check_truncation(xi, cfg, J, t);
        }
        row.push_back(xi.trace());
      }
      if (ok) {
        Z[j] = std::move(row);
        break;
      }
      n = std::min(cfg.n_max_cap, static_cast<int>(std::ceil(n * cfg.n_max_growth)));
    }
    done.emplace(J, j);
  }
  return Z;
}

inline std::vector<cplx> generating_function(const ModelParams& p, const FockState& initial, double t,
                                             const std::vector<double>& J_grid, const NoiseConfig& cfg) {
  auto tr = generating_function_trace(p, initial, {t}, J_grid, cfg);
  std::vector<cplx> z;
  z.reserve(tr.size());
  for (const auto& row : tr) z.push_back(row[0]);
  return z;
}

// ---- grids and densities ----

inline std::vector<double> symmetric_grid(double J_max, int N_J) {
  if (N_J < 3 || N_J % 2 == 0) throw ValidationError("J grid needs an odd number of points >= 3");
  if (!(J_max > 0.0)) throw ValidationError("J_max must be positive");
  std::vector<double> g(N_J);
  const int c = N_J / 2;
  const double dJ = J_max / c;
  for (int j = 0; j < N_J; ++j) g[j] = (j - c) * dJ;
  return g;
}

// dx = 2 pi / (N_J dJ), centred on zero
inline std::vector<double> nyquist_x_grid(const std::vector<double>& J) {
  const int n = static_cast<int>(J.size());
  const double dJ = J[1] - J[0];
  const double dx = 2.0 * std::numbers::pi / (n * dJ);
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = (i - n / 2) * dx;
  return x;
}

struct DensityOptions {
  bool require_decay = true;
  double decay_tol = 1e-6;
};

struct Density {
  std::vector<double> x;
  std::vector<double> P;
  double max_imag = 0.0;
  double normalization = 0.0;
  double edge_Z = 0.0;
};

inline Density probability_density(const std::vector<cplx>& Z, const std::vector<double>& J, const std::vector<double>& x,
                                   const DensityOptions& opt = {}) {
  if (Z.size() != J.size() || J.size() < 3) throw ValidationError("probability_density: grid/value size mismatch");
  const std::size_t n = J.size();
  const double dJ = J[1] - J[0];
  for (std::size_t j = 0; j < n; ++j)
    if (std::abs(J[j] + J[n - 1 - j]) > 1e-9 * dJ || (j > 0 && std::abs(J[j] - J[j - 1] - dJ) > 1e-9 * dJ))
      throw ValidationError("probability_density: J grid must be uniform and symmetric");
  Density d;
  d.x = x;
  d.edge_Z = std::max(std::abs(Z.front()), std::abs(Z.back()));
  if (opt.require_decay && !(d.edge_Z < opt.decay_tol))
    throw GridError("grid adequacy: |Z(+-J_max)| = " + std::to_string(d.edge_Z));
  d.P.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    cplx s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += Z[j] * std::exp(-kI * (J[j] * x[i]));
    s *= dJ / (2.0 * std::numbers::pi);
    d.P[i] = s.real();
    d.max_imag = std::max(d.max_imag, std::abs(s.imag()));
  }
  const double dx = x.size() > 1 ? x[1] - x[0] : 1.0;
  for (double v : d.P) d.normalization += v * dx;
  return d;
}

inline std::array<double, 6> density_moments(const Density& d) {
  std::array<double, 6> m{};
  const double dx = d.x[1] - d.x[0];
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    double p = d.P[i] * dx, xn = 1.0;
    for (int k = 0; k < 6; ++k) {
      xn *= d.x[i];
      m[k] += xn * p;
    }
  }
  return m;
}

inline std::array<double, 4> cumulants_from_moments(const std::array<double, 4>& mu) {
  const double m1 = mu[0], m2 = mu[1], m3 = mu[2], m4 = mu[3];
  return {m1, m2 - m1 * m1, m3 - 3.0 * m2 * m1 + 2.0 * m1 * m1 * m1,
          m4 - 4.0 * m3 * m1 - 3.0 * m2 * m2 + 12.0 * m2 * m1 * m1 - 6.0 * m1 * m1 * m1 * m1};
}

inline double excess_kurtosis(const std::array<double, 4>& k) { return k[1] > 0.0 ? k[3] / (k[1] * k[1]) : 0.0; }

// ---- finite-difference cumulants ----

namespace detail {

inline constexpr std::array<std::array<double, 9>, 4> kStencil = {{
    {1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0, 4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280},
    {-1.0 / 560, 8.0 / 315, -1.0 / 5, 8.0 / 5, -205.0 / 72, 8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560},
    {-7.0 / 240, 3.0 / 10, -169.0 / 120, 61.0 / 30, 0.0, -61.0 / 30, 169.0 / 120, -3.0 / 10, 7.0 / 240},
    {7.0 / 240, -2.0 / 5, 169.0 / 60, -122.0 / 15, 91.0 / 8, -122.0 / 15, 169.0 / 60, -2.0 / 5, 7.0 / 240},
}};

}  // namespace detail

// Raw moments i^{-n} Z^(n)(0), n = 1..4, from Z at offsets -4h..4h.
inline std::array<double, 4> stencil_moments(const std::array<cplx, 9>& z, double h) {
  std::array<double, 4> mu{};
  const cplx phase[4] = {-kI, -1.0, kI, 1.0};
  for (int n = 0; n < 4; ++n) {
    cplx d = 0.0;
    for (int s = 0; s < 9; ++s) d += detail::kStencil[n][s] * z[s];
    d /= std::pow(h, n + 1);
    mu[n] = (phase[n] * d).real();
  }
  return mu;
}

struct StencilEstimate {
  double h = 0.0;
  std::array<double, 4> moments{};
  std::array<double, 4> cumulants{};
  double excess_kurtosis = 0.0;
};

struct CumulantSample {
  double t = 0.0;
  double sigma_estimate = 0.0;
  std::array<double, 4> moments{};
  std::array<double, 4> cumulants{};
  double excess_kurtosis = 0.0;
  std::vector<StencilEstimate> sweep;
  double sweep_spread = 0.0;  // standardized spread between the two finest steps
  bool stable = true;
};

struct CumulantOptions {
  std::vector<double> step_factors{0.2, 0.1, 0.05};  // steps in units of 1/sigma
  double probe_J = 1e-3;
  double spread_tol = 1e-4;
};

inline std::vector<CumulantSample> cumulant_trace(const ModelParams& p, const FockState& initial,
                                                  const std::vector<double>& times, const NoiseConfig& cfg,
                                                  const CumulantOptions& opt = {}) {
  if (opt.step_factors.size() < 2) throw ValidationError("cumulant_trace needs at least two step sizes");
  auto probe = generating_function_trace(p, initial, times, {opt.probe_J}, cfg)[0];
  std::vector<CumulantSample> out;
  for (std::size_t i = 0; i < times.size(); ++i) {
    CumulantSample s;
    s.t = times[i];
    // second moment is ~ 2 (1 - Re Z(J)) / J^2
    double var = 2.0 * (1.0 - probe[i].real()) / (opt.probe_J * opt.probe_J);
    if (!(var > 1e-14)) {
      out.push_back(s);
      continue;
    }
    s.sigma_estimate = std::sqrt(var);
    std::vector<double> Js;
    for (double f : opt.step_factors)
      for (int q = -4; q <= 4; ++q)
        if (q != 0) Js.push_back(q * f / s.sigma_estimate);
    auto Z = generating_function(p, initial, times[i], Js, cfg);
    std::size_t idx = 0;
    for (double f : opt.step_factors) {
      std::array<cplx, 9> z;
      for (int q = -4; q <= 4; ++q) z[q + 4] = q == 0 ? initial.trace() : Z[idx++];
      StencilEstimate e;
      e.h = f / s.sigma_estimate;
      e.moments = stencil_moments(z, e.h);
      e.cumulants = cumulants_from_moments(e.moments);
      e.excess_kurtosis = excess_kurtosis(e.cumulants);
      s.sweep.push_back(e);
    }
    const auto& fine = s.sweep[s.sweep.size() - 1];
    const auto& mid = s.sweep[s.sweep.size() - 2];
    const double ratio = mid.h / fine.h;
    const double w = std::pow(ratio, 8);
    for (int n = 0; n < 4; ++n) {
      s.moments[n] = (w * fine.moments[n] - mid.moments[n]) / (w - 1.0);
      s.sweep_spread = std::max(s.sweep_spread, std::abs(fine.moments[n] - mid.moments[n]) / std::pow(s.sigma_estimate, n + 1));
    }
    s.cumulants = cumulants_from_moments(s.moments);
    s.excess_kurtosis = excess_kurtosis(s.cumulants);
    s.stable = s.sweep_spread < opt.spread_tol;
    out.push_back(s);
  }
  return out;
}

// ---- time-ordered correlator integrals ----

namespace detail {

inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5)), dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double pn = n == 1 ? z : p1;
      double pm = n == 1 ? 1.0 : p0;
      dp = n * (z * pn - pm) / (z * z - 1.0);
      double dz = pn / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace detail

// (n!/2^n) times the time-ordered integral of the n-point Vo correlator, n in {1, 2}.
inline double correlator_moment(const ModelParams& p, const FockState& initial, int order, double t, int nodes = 32) {
  if (order != 1 && order != 2) throw ValidationError("correlator_moment supports orders 1 and 2");
  if (t == 0.0) return 0.0;
  std::vector<double> gx, gw;
  detail::gauss_legendre(nodes, gx, gw);
  BlockExponentialCache cache(p, initial.truncation());
  cplx total = 0.0;
  for (int a = 0; a < nodes; ++a) {
    const double t1 = 0.5 * t * (gx[a] + 1.0);
    const double w1 = 0.5 * t * gw[a];
    if (order == 1) {
      total += w1 * multi_time_correlator(p, {{Superscript::Anti, t1}}, initial, false, &cache);
      continue;
    }
    for (int b = 0; b < nodes; ++b) {
      const double t2 = 0.5 * t1 * (gx[b] + 1.0);
      const double w2 = 0.5 * t1 * gw[b];
      total += w1 * w2 * multi_time_correlator(p, {{Superscript::Anti, t1}, {Superscript::Anti, t2}}, initial, false, &cache);
    }
  }
  return 0.5 * total.real();
}

// ---- full runs ----

struct GridSpec {
  bool automatic = true;
  double J_max = 8.0;
  int N_J = 257;
  double half_width_sigmas = 6.0;
  double decay_target = 1e-8;
  double J_cap = 400.0;
  bool stability_check = true;
};

struct NoiseGates {
  double z0_dev = 0.0;
  double conj_dev = 0.0;
  double normalization_dev = 0.0;
  double max_imag = 0.0;
  double edge_Z = 0.0;
  double grid_moment_shift = 0.0;
  bool point_mass = false;
  bool cumulants_stable = true;

  bool pass() const {
    bool ok = z0_dev < 1e-10 && conj_dev < 1e-10 && normalization_dev < 1e-6 && max_imag < 1e-8 && grid_moment_shift < 1e-5;
    return ok && (point_mass || edge_Z < 1e-6) && cumulants_stable;
  }
};

struct NoiseRun {
  ModelParams params;
  FockState initial;
  double t = 0.0;
  std::vector<double> J_grid;
  std::vector<double> x_grid;
  std::vector<cplx> Z_values;
  std::vector<double> P_values;
  std::array<double, 6> moments{};
  std::array<double, 4> cumulants{};
  double excess_kurtosis = 0.0;
  NoiseGates gates;
};

namespace detail {

inline std::vector<double> mirrored(const std::vector<double>& positive) {
  std::vector<double> g;
  for (auto it = positive.rbegin(); it != positive.rend(); ++it) g.push_back(-*it);
  for (double v : positive)
    if (v != 0.0) g.push_back(v);
  return g;
}

inline std::vector<cplx> mirrored(const std::vector<cplx>& positive) {
  std::vector<cplx> z;
  for (auto it = positive.rbegin(); it != positive.rend(); ++it) z.push_back(std::conj(*it));
  for (std::size_t i = 1; i < positive.size(); ++i) z.push_back(positive[i]);
  return z;
}

inline double standardized_shift(const std::array<double, 6>& a, const std::array<double, 6>& b, double sigma) {
  double s = 0.0;
  for (int n = 0; n < 4; ++n) s = std::max(s, std::abs(a[n] - b[n]) / std::pow(sigma, n + 1));
  return s;
}

}  // namespace detail

inline NoiseRun run_noise(const ModelParams& p, const FockState& initial, double t, const NoiseConfig& cfg,
                          const GridSpec& spec = {}, const CumulantOptions& copts = {}) {
  detail::check_initial(initial, cfg);
  NoiseRun run{p, initial, t};
  auto samples = cumulant_trace(p, initial, {t}, cfg, copts);
  const CumulantSample& cs = samples[0];
  run.cumulants = cs.cumulants;
  run.excess_kurtosis = cs.excess_kurtosis;
  run.gates.cumulants_stable = cs.stable;
  run.gates.point_mass = cs.sigma_estimate == 0.0;

  // Z is computed on J >= 0 and extended by conjugation when the state is Hermitian.
  std::vector<double> Jpos;
  std::vector<cplx> Zpos;
  NoiseConfig full = cfg;
  full.mirror_negative_J = false;
  auto extend_to = [&](int n_half, double dJ) {
    std::vector<double> fresh;
    for (int j = static_cast<int>(Jpos.size()); j <= n_half; ++j) fresh.push_back(j * dJ);
    if (fresh.empty()) return;
    auto z = generating_function(p, initial, t, fresh, full);
    Jpos.insert(Jpos.end(), fresh.begin(), fresh.end());
    Zpos.insert(Zpos.end(), z.begin(), z.end());
  };

  double dJ;
  int n_half;
  if (!spec.automatic || run.gates.point_mass) {
    n_half = spec.N_J / 2;
    dJ = spec.J_max / n_half;
    extend_to(n_half, dJ);
  } else {
    const double sigma = cs.sigma_estimate;
    dJ = 2.0 * std::numbers::pi / (2.0 * spec.half_width_sigmas * sigma);
    n_half = std::max(16, static_cast<int>(std::ceil(std::sqrt(2.0 * std::log(1.0 / spec.decay_target)) / sigma / dJ)));
    extend_to(n_half, dJ);
    auto tail = [&] {
      double m = 0.0;
      for (int j = n_half - 2; j <= n_half; ++j) m = std::max(m, std::abs(Zpos[j]));
      return m;
    };
    while (!(tail() < spec.decay_target)) {
      n_half = static_cast<int>(std::ceil(1.5 * n_half));
      if (n_half * dJ > spec.J_cap)
        throw GridError("grid adequacy: |Z| above " + std::to_string(spec.decay_target) + " up to J_cap=" +
                        std::to_string(spec.J_cap));
      extend_to(n_half, dJ);
    }
  }

  const bool herm = initial.hermiticity_deviation() <= 1e-12;
  auto assemble = [&](int nh, std::vector<double>& J, std::vector<cplx>& Z) {
    std::vector<double> jp(Jpos.begin(), Jpos.begin() + nh + 1);
    std::vector<cplx> zp(Zpos.begin(), Zpos.begin() + nh + 1);
    J = detail::mirrored(jp);
    if (herm) {
      Z = detail::mirrored(zp);
    } else {
      std::vector<double> neg(J.begin(), J.begin() + nh);
      Z = generating_function(p, initial, t, neg, full);
      Z.insert(Z.end(), zp.begin(), zp.end());
    }
  };
  assemble(n_half, run.J_grid, run.Z_values);

  // Z(0) and conjugation symmetry from independent propagations
  {
    const double Jc = run.J_grid.back();
    auto zc = generating_function(p, initial, t, {0.0, -Jc, Jc, -dJ, dJ}, full);
    run.gates.z0_dev = std::abs(zc[0] - initial.trace());
    run.gates.conj_dev = std::max(std::abs(zc[1] - std::conj(zc[2])), std::abs(zc[3] - std::conj(zc[4])));
  }

  run.x_grid = nyquist_x_grid(run.J_grid);
  DensityOptions dopt;
  dopt.require_decay = !run.gates.point_mass;
  Density d = probability_density(run.Z_values, run.J_grid, run.x_grid, dopt);
  run.P_values = d.P;
  run.moments = density_moments(d);
  run.gates.max_imag = d.max_imag;
  run.gates.normalization_dev = std::abs(d.normalization - 1.0);
  run.gates.edge_Z = d.edge_Z;

  if (spec.stability_check && !run.gates.point_mass) {
    extend_to(2 * n_half, dJ);
    std::vector<double> J2;
    std::vector<cplx> Z2;
    assemble(2 * n_half, J2, Z2);
    Density d2 = probability_density(Z2, J2, nyquist_x_grid(J2), dopt);
    run.gates.grid_moment_shift = detail::standardized_shift(run.moments, density_moments(d2), cs.sigma_estimate);
  }
  return run;
}

inline nlohmann::json to_json(const NoiseRun& r) {
  nlohmann::json z = nlohmann::json::array();
  for (const auto& v : r.Z_values) z.push_back({v.real(), v.imag()});
  const auto& g = r.gates;
  return {{"params", {{"omega", r.params.omega}, {"U", r.params.U}, {"kappa1", r.params.kappa1}, {"kappa2", r.params.kappa2}}},
          {"initial", to_json(r.initial)},
          {"t", r.t},
          {"J_grid", r.J_grid},
          {"x_grid", r.x_grid},
          {"Z_values", z},
          {"P_values", r.P_values},
          {"moments", r.moments},
          {"cumulants", r.cumulants},
          {"excess_kurtosis", r.excess_kurtosis},
          {"gates",
           {{"z0_dev", g.z0_dev},
            {"conj_dev", g.conj_dev},
            {"normalization_dev", g.normalization_dev},
            {"max_imag", g.max_imag},
            {"edge_Z", g.edge_Z},
            {"grid_moment_shift", g.grid_moment_shift},
            {"point_mass", g.point_mass},
            {"cumulants_stable", g.cumulants_stable},
            {"pass", g.pass()}}}};
}

inline void write_density_csv(std::ostream& os, const NoiseRun& r) {
  os << "x,P\n";
  os.precision(17);
  for (std::size_t i = 0; i < r.x_grid.size(); ++i) os << r.x_grid[i] << ',' << r.P_values[i] << '\n';
}

inline void write_z_csv(std::ostream& os, const NoiseRun& r) {
  os << "J,re_Z,im_Z\n";
  os.precision(17);
  for (std::size_t i = 0; i < r.J_grid.size(); ++i)
    os << r.J_grid[i] << ',' << r.Z_values[i].real() << ',' << r.Z_values[i].imag() << '\n';
}

}  // namespace kerrloss
