#include "mra/unbias.hpp"

#include <algorithm>
#include <cmath>

namespace mra {

DilationConstants DilationConstants::from_eta(double eta) {
  const double a = std::sqrt(3.0) * eta;
  if (!(eta > 0.0) || !(a < 1.0))
    throw Error("DilationConstants: eta must satisfy 0 < sqrt(3) eta < 1");
  DilationConstants k;
  k.eta = eta;
  k.c0 = (1.0 - a) / (1.0 + a);
  k.c1 = 2.0 * a;
  k.c2 = 1.0 / (1.0 + a);
  return k;
}

SpectrumGrid dilation_apply(const SpectrumGrid& s, double c) {
  if (!(c > 0.0)) throw Error("dilation_apply: c must be positive");
  const double c3 = c * c * c;
  SpectrumGrid out{s.grid, std::vector<double>(s.grid.n)};
  if (c == 1.0) {
    out.values = s.values;
    return out;
  }
  for (int i = 0; i < s.grid.n; ++i)
    out.values[i] = c3 * interp_cubic(s.values, s.grid, c * s.grid.omega(i));
  return out;
}

SpectrumGrid dilation_apply_transpose(const SpectrumGrid& s, double c) {
  if (!(c > 0.0)) throw Error("dilation_apply_transpose: c must be positive");
  const double c3 = c * c * c;
  const FrequencyGrid& g = s.grid;
  SpectrumGrid out{g, std::vector<double>(g.n, 0.0)};
  if (c == 1.0) {
    out.values = s.values;
    return out;
  }
  // Scatter the interpolation weights of row i into column space.
  for (int i = 0; i < g.n; ++i) {
    const double pos = c * g.omega(i) / g.domega + g.n / 2;
    const double fl = std::floor(pos);
    const int base = static_cast<int>(fl);
    if (base < -1 || base > g.n) continue;
    const double t = pos - fl;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double w[4] = {0.5 * (-t3 + 2.0 * t2 - t),
                         0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
                         0.5 * (-3.0 * t3 + 4.0 * t2 + t),
                         0.5 * (t3 - t2)};
    const double v = c3 * s.values[i];
    for (int k = 0; k < 4; ++k) {
      const int idx = base - 1 + k;
      if (idx >= 0 && idx < g.n) out.values[idx] += w[k] * v;
    }
  }
  return out;
}

SpectrumGrid apply_A(const SpectrumGrid& s, const DilationConstants& k) {
  SpectrumGrid out = dilation_apply(s, k.c0);
  for (int i = 0; i < s.grid.n; ++i)
    out.values[i] = s.values[i] - out.values[i];
  return out;
}

SpectrumGrid apply_A_adjoint(const SpectrumGrid& s,
                             const DilationConstants& k) {
  SpectrumGrid out = dilation_apply_transpose(s, k.c0);
  for (int i = 0; i < s.grid.n; ++i)
    out.values[i] = s.values[i] - out.values[i];
  return out;
}

SpectrumGrid forward_B(const SpectrumGrid& s, double eta) {
  const double a = std::sqrt(3.0) * eta;
  if (!(eta > 0.0) || !(a < 1.0)) throw Error("forward_B: eta out of range");
  const double up = 1.0 + a;
  const double dn = 1.0 - a;
  const double cu = up * up * up;
  const double cd = dn * dn * dn;
  SpectrumGrid out{s.grid, std::vector<double>(s.grid.n)};
  for (int i = 0; i < s.grid.n; ++i) {
    const double w = s.grid.omega(i);
    out.values[i] = (cu * interp_cubic(s.values, s.grid, up * w) -
                     cd * interp_cubic(s.values, s.grid, dn * w)) /
                    (2.0 * a);
  }
  return out;
}

void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  if (n < 2) throw Error("gauss_legendre: need at least 2 nodes");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Legendre recurrence for P_n(x) and P_n'(x).
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

namespace {

SpectrumGrid quadrature_dilation_average(const SpectrumGrid& pf, double eta,
                                         int n_quad, bool derivative) {
  if (!(eta > 0.0)) throw Error("g_eta_oracle: eta must be positive");
  if (n_quad < 64) throw Error("g_eta_oracle: n_quad must be at least 64");
  std::vector<double> nodes, weights;
  gauss_legendre(n_quad, nodes, weights);
  const double a = std::sqrt(3.0) * eta;
  SpectrumGrid out{pf.grid, std::vector<double>(pf.grid.n, 0.0)};
  for (int q = 0; q < n_quad; ++q) {
    const double tau = a * nodes[q];
    const double scale = 1.0 - tau;
    // weights already sum to 2 on [-1,1]; the uniform density 1/(2a) and the
    // interval length a cancel into weight/2.
    const double wq = weights[q] / 2.0;
    const double amp = derivative ? wq * scale * scale * scale
                                  : wq * scale * scale;
    for (int i = 0; i < pf.grid.n; ++i) {
      const double w = pf.grid.omega(i);
      const double v = derivative
                           ? interp_cubic_derivative(pf.values, pf.grid, scale * w)
                           : interp_cubic(pf.values, pf.grid, scale * w);
      out.values[i] += amp * v;
    }
  }
  return out;
}

}  // namespace

SpectrumGrid g_eta_oracle(const SpectrumGrid& pf, double eta, int n_quad) {
  return quadrature_dilation_average(pf, eta, n_quad, false);
}

SpectrumGrid g_eta_oracle_derivative(const SpectrumGrid& pf, double eta,
                                     int n_quad) {
  return quadrature_dilation_average(pf, eta, n_quad, true);
}

SpectrumGrid data_term(const SpectrumGrid& g_smooth,
                       const SpectrumGrid& g_smooth_deriv) {
  if (!(g_smooth.grid == g_smooth_deriv.grid))
    throw Error("data_term: grid mismatch");
  SpectrumGrid d{g_smooth.grid, std::vector<double>(g_smooth.grid.n)};
  for (int i = 0; i < d.grid.n; ++i)
    d.values[i] = 3.0 * g_smooth.values[i] +
                  d.grid.omega(i) * g_smooth_deriv.values[i];
  return d;
}

double choose_smoothing_width(double sigma, std::int64_t m, double domega) {
  if (m < 1) throw Error("choose_smoothing_width: m must be >= 1");
  double l = 0.0;
  if (sigma >= 1.0)
    l = std::pow(std::pow(sigma, 4) / static_cast<double>(m), 1.0 / 6.0);
  else if (sigma > 0.0)
    l = std::pow(sigma * sigma / static_cast<double>(m), 1.0 / 6.0);
  return std::max(l, domega);
}

void OptimizerConfig::validate() const {
  if (max_iters < 1 || joint_inner_iters < 1 || joint_outer_iters < 1)
    throw Error("OptimizerConfig: iteration counts must be positive");
  if (!(grad_tol > 0.0)) throw Error("OptimizerConfig: grad_tol must be > 0");
  if (!(eta_lo > 0.0) || !(eta_hi > eta_lo) ||
      !(std::sqrt(3.0) * eta_hi < 1.0))
    throw Error("OptimizerConfig: eta bounds must satisfy 0 < lo < hi < 3^-1/2");
  for (double e : eta_inits)
    if (e <= eta_lo || e >= eta_hi)
      throw Error("OptimizerConfig: eta inits must be interior to the bounds");
}

namespace {

double dot_weighted(const std::vector<double>& a, const std::vector<double>& b,
                    double domega) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc * domega;
}

// Least-squares state for ||A g - b||^2 at fixed constants, with g either
// direct (projected to >= 0) or parametrized as g = p^2.
class InversionProblem {
 public:
  InversionProblem(const SpectrumGrid& d, const DilationConstants& k)
      : grid_(d.grid), constants_(k) {
    const SpectrumGrid ld = dilation_apply(d, k.c2);
    b_.resize(grid_.n);
    for (int i = 0; i < grid_.n; ++i) b_[i] = k.c1 * ld.values[i];
  }

  const FrequencyGrid& grid() const { return grid_; }
  const std::vector<double>& rhs() const { return b_; }
  const DilationConstants& constants() const { return constants_; }

  double loss(const std::vector<double>& g) const {
    const SpectrumGrid ag =
        apply_A(SpectrumGrid{grid_, g}, constants_);
    double acc = 0.0;
    for (int i = 0; i < grid_.n; ++i) {
      const double r = ag.values[i] - b_[i];
      acc += r * r;
    }
    return acc * grid_.domega;
  }

  // Function-space gradient 2 A^T (A g - b); the dw weight lives in the
  // inner product.
  std::vector<double> gradient(const std::vector<double>& g) const {
    SpectrumGrid r{grid_, std::vector<double>(grid_.n)};
    const SpectrumGrid ag = apply_A(SpectrumGrid{grid_, g}, constants_);
    for (int i = 0; i < grid_.n; ++i) r.values[i] = ag.values[i] - b_[i];
    SpectrumGrid at = apply_A_adjoint(r, constants_);
    std::vector<double> grad(grid_.n);
    for (int i = 0; i < grid_.n; ++i) grad[i] = 2.0 * at.values[i];
    return grad;
  }

 private:
  FrequencyGrid grid_;
  DilationConstants constants_;
  std::vector<double> b_;
};

struct DescentState {
  std::vector<double> x;       // p (sqrt mode) or g (direct mode)
  double step = 1.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  // previous iterate and gradient for the Barzilai-Borwein step guess
  std::vector<double> prev_x;
  std::vector<double> prev_grad;
  bool has_prev = false;
};

std::vector<double> to_spectrum(const std::vector<double>& x,
                                Parametrization mode) {
  if (mode == Parametrization::direct_projected) return x;
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] * x[i];
  return g;
}

// Runs up to max_steps backtracking gradient steps; keeps the loss trace
// nonincreasing. Returns when the relative gradient criterion is met, the
// step underflows, or the budget is exhausted.
void descend(const InversionProblem& prob, Parametrization mode,
             DescentState& st, int max_steps, double grad_tol_abs,
             double armijo, std::vector<double>* trace) {
  const double domega = prob.grid().domega;
  std::vector<double> g = to_spectrum(st.x, mode);
  st.loss = prob.loss(g);
  if (trace && trace->empty()) trace->push_back(st.loss);

  for (int it = 0; it < max_steps; ++it) {
    std::vector<double> grad_g = prob.gradient(g);
    std::vector<double> grad(st.x.size());
    if (mode == Parametrization::sqrt) {
      for (std::size_t i = 0; i < grad.size(); ++i)
        grad[i] = 2.0 * st.x[i] * grad_g[i];
    } else {
      grad = grad_g;
    }
    const double gnorm2 = dot_weighted(grad, grad, domega);
    st.grad_norm = std::sqrt(gnorm2);
    if (st.grad_norm <= grad_tol_abs) {
      st.converged = true;
      return;
    }

    // Barzilai-Borwein guess for the trial step; backtracking keeps the
    // trace monotone regardless.
    if (st.has_prev) {
      double sy = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double s = st.x[i] - st.prev_x[i];
        const double y = grad[i] - st.prev_grad[i];
        sy += s * y;
        ss += s * s;
      }
      if (sy > 0.0 && ss > 0.0)
        st.step = std::clamp(ss / sy, 1e-12, 1e8);
    }
    st.prev_x = st.x;
    st.prev_grad = grad;
    st.has_prev = true;

    bool accepted = false;
    while (st.step > 1e-20) {
      std::vector<double> trial(st.x.size());
      for (std::size_t i = 0; i < trial.size(); ++i) {
        double v = st.x[i] - st.step * grad[i];
        if (mode == Parametrization::direct_projected && v < 0.0) v = 0.0;
        trial[i] = v;
      }
      const std::vector<double> trial_g = to_spectrum(trial, mode);
      const double trial_loss = prob.loss(trial_g);
      if (trial_loss <= st.loss - armijo * st.step * gnorm2) {
        st.x = std::move(trial);
        g = trial_g;
        st.loss = trial_loss;
        accepted = true;
        break;
      }
      st.step *= 0.5;
    }
    ++st.iterations;
    if (trace) trace->push_back(st.loss);
    if (!accepted) return;  // step underflow: cannot make progress
  }
}

std::vector<double> initial_iterate(const InversionProblem& prob,
                                    Parametrization mode) {
  const std::vector<double>& b = prob.rhs();
  double peak = 0.0;
  for (double v : b) peak = std::max(peak, std::abs(v));
  std::vector<double> g0(b.size());
  // Small positive floor keeps sqrt-mode coordinates off the p = 0 saddle.
  const double floor_v = 1e-3 * peak;
  for (std::size_t i = 0; i < b.size(); ++i)
    g0[i] = std::max(b[i], floor_v);
  if (mode == Parametrization::direct_projected) return g0;
  for (double& v : g0) v = std::sqrt(v);
  return g0;
}

EstimateReport finish_report(const InversionProblem& prob,
                             Parametrization mode, const DescentState& st,
                             std::vector<double> trace) {
  EstimateReport rep;
  rep.pf_hat = SpectrumGrid{prob.grid(), to_spectrum(st.x, mode)};
  rep.loss_trace = std::move(trace);
  rep.converged = st.converged;
  rep.iterations = st.iterations;
  rep.final_loss = st.loss;
  rep.grad_norm = st.grad_norm;
  rep.eta_used = prob.constants().eta;
  return rep;
}

}  // namespace

EstimateReport invert_known_eta(const SpectrumGrid& d, double eta,
                                const OptimizerConfig& cfg) {
  cfg.validate();
  const DilationConstants k = DilationConstants::from_eta(eta);
  InversionProblem prob(d, k);

  const double scale = std::max(l2_norm(d), 1e-300);
  DescentState st;
  st.x = initial_iterate(prob, cfg.parametrization);
  std::vector<double> trace;
  descend(prob, cfg.parametrization, st, cfg.max_iters, cfg.grad_tol * scale,
          cfg.armijo, &trace);

  EstimateReport rep = finish_report(prob, cfg.parametrization, st,
                                     std::move(trace));
  rep.eta_is_oracle = true;
  return rep;
}

namespace {

struct JointRun {
  DescentState state;
  double eta = 0.0;
  std::vector<double> trace;
};

JointRun run_joint_candidate(const SpectrumGrid& d, double eta_init,
                             const OptimizerConfig& cfg) {
  JointRun run;
  run.eta = eta_init;

  InversionProblem prob(d, DilationConstants::from_eta(run.eta));
  run.state.x = initial_iterate(prob, cfg.parametrization);
  const double scale = std::max(l2_norm(d), 1e-300);
  const double gtol = cfg.grad_tol * scale;

  // A trial eta is judged after its own block of g gradient steps: at a
  // fixed g the loss is locally stationary in eta once g is fitted (narrow
  // valley), so eta moves must be paired with a partial refit.
  auto refit = [&](double eta_trial, DescentState st) {
    InversionProblem trial_prob(d, DilationConstants::from_eta(eta_trial));
    st.has_prev = false;
    descend(trial_prob, cfg.parametrization, st, cfg.joint_inner_iters, gtol,
            cfg.armijo, nullptr);
    return st;
  };

  double step = 0.02;
  int stagnant = 0;
  for (int outer = 0; outer < cfg.joint_outer_iters; ++outer) {
    descend(prob, cfg.parametrization, run.state, cfg.joint_inner_iters, gtol,
            cfg.armijo, &run.trace);

    bool moved = false;
    for (; step >= 1e-4; step *= 0.5) {
      double best_eta = run.eta;
      DescentState best_state;
      double best_loss = run.state.loss;
      for (const double e : {run.eta - step, run.eta + step}) {
        const double ec = std::clamp(e, cfg.eta_lo, cfg.eta_hi);
        if (ec == run.eta) continue;
        DescentState st = refit(ec, run.state);
        if (st.loss < best_loss) {
          best_loss = st.loss;
          best_eta = ec;
          best_state = std::move(st);
        }
      }
      if (best_eta != run.eta) {
        run.eta = best_eta;
        run.state = std::move(best_state);
        run.trace.push_back(run.state.loss);
        prob = InversionProblem(d, DilationConstants::from_eta(run.eta));
        step = std::min(step * 2.0, 0.05);
        moved = true;
        break;
      }
    }
    if (moved) {
      stagnant = 0;
    } else {
      step = 1e-4;
      ++stagnant;
    }
    if (stagnant >= 2 && run.state.converged) break;
    if (stagnant >= 4) break;
  }

  // Polish g at the settled eta.
  descend(prob, cfg.parametrization, run.state, cfg.max_iters, gtol,
          cfg.armijo, &run.trace);
  return run;
}

}  // namespace

EstimateReport joint_optimize(const SpectrumGrid& d_tilde,
                              const OptimizerConfig& cfg) {
  cfg.validate();
  if (cfg.eta_inits.empty())
    throw Error("joint_optimize: eta_inits must be nonempty");

  std::vector<EtaCandidate> candidates;
  std::optional<JointRun> best;
  for (double init : cfg.eta_inits) {
    JointRun run = run_joint_candidate(d_tilde, init, cfg);
    EtaCandidate cand;
    cand.eta_init = init;
    cand.eta_learned = run.eta;
    cand.final_loss = run.state.loss;
    cand.discarded = run.eta - cfg.eta_lo < cfg.boundary_margin ||
                     cfg.eta_hi - run.eta < cfg.boundary_margin;
    if (!cand.discarded && (!best || run.state.loss < best->state.loss))
      best = std::move(run);
    candidates.push_back(cand);
  }

  if (!best)
    throw EtaEstimationError(
        "eta estimation failed; all candidates at boundary");

  InversionProblem prob(d_tilde, DilationConstants::from_eta(best->eta));
  EstimateReport rep = finish_report(prob, cfg.parametrization, best->state,
                                     std::move(best->trace));
  rep.eta_is_oracle = false;
  rep.eta_hat = best->eta;
  rep.candidates = std::move(candidates);
  return rep;
}

EstimateReport estimate_noisy(const SpectrumGrid& batch_mean,
                              std::optional<double> eta, double sigma,
                              std::int64_t m, const OptimizerConfig& cfg) {
  cfg.validate();
  if (!(sigma >= 0.0)) throw Error("estimate_noisy: sigma must be >= 0");
  const double width = cfg.l_override.value_or(
      choose_smoothing_width(sigma, m, batch_mean.grid.domega));

  const SpectrumGrid smoothed = gaussian_smooth(batch_mean, width);
  const SpectrumGrid smoothed_deriv =
      gaussian_smooth_derivative(batch_mean, width);
  const SpectrumGrid d = data_term(smoothed, smoothed_deriv);

  EstimateReport rep =
      eta ? invert_known_eta(d, *eta, cfg) : joint_optimize(d, cfg);
  rep.l_smooth = width;
  rep.sigma_used = sigma;
  rep.m_observations = m;
  return rep;
}

SampledSignal recover_signal_real_positive(const SpectrumGrid& pf,
                                           const SpatialGrid& grid,
                                           int* clamped) {
  if (pf.grid.n != grid.n)
    throw Error("recover_signal_real_positive: grid mismatch");
  int count = 0;
  ComplexSpectrum fhat{pf.grid,
                       std::vector<std::complex<double>>(pf.grid.n)};
  for (int i = 0; i < pf.grid.n; ++i) {
    double v = pf.values[i];
    if (v < 0.0) {
      v = 0.0;
      ++count;
    }
    fhat.values[i] = std::sqrt(v);
  }
  if (clamped) *clamped = count;
  return inverse_fourier_transform(fhat);
}

}  // namespace mra
