#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mra/grid.hpp"

namespace mra {

/// The eta-dependent constants of the unbiasing operator,
///   c0 = (1 - sqrt(3) eta) / (1 + sqrt(3) eta),
///   c1 = 2 sqrt(3) eta,
///   c2 = 1 / (1 + sqrt(3) eta).
/// Defined for 0 < sqrt(3) eta < 1; the model's own bound eta <= 12^{-1/2}
/// is enforced by ModelParams, not here, because the eta search interval in
/// the joint optimization extends up to 0.40.
struct DilationConstants {
  double eta = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  static DilationConstants from_eta(double eta);
};

/// (L_c s)(w) = c^3 s(c w), cubic interpolation, zero outside the band.
SpectrumGrid dilation_apply(const SpectrumGrid& s, double c);

/// Exact transpose of the discrete dilation operator. Approximates the
/// continuous adjoint c^2 s(w / c); being the exact transpose is what makes
/// the analytic loss gradient match finite differences to roundoff.
SpectrumGrid dilation_apply_transpose(const SpectrumGrid& s, double c);

/// A = I - L_{c0}.
SpectrumGrid apply_A(const SpectrumGrid& s, const DilationConstants& k);

/// A* for the discrete operator (exact transpose).
SpectrumGrid apply_A_adjoint(const SpectrumGrid& s, const DilationConstants& k);

/// Closed-form forward map from a power spectrum to the data term,
///   (B_eta g)(w) = [(1+a)^3 g((1+a)w) - (1-a)^3 g((1-a)w)] / (2a),
/// a = sqrt(3) eta. Equals C1^{-1} L_{C2}^{-1} (I - L_{C0}) up to
/// interpolation error.
SpectrumGrid forward_B(const SpectrumGrid& s, double eta);

/// Gauss-Legendre quadrature of the dilation average
///   g_eta(w) = (2 sqrt(3) eta)^{-1} integral (1-tau)^2 g((1-tau) w) dtau.
/// Brute-force oracle for tests, not the production path.
SpectrumGrid g_eta_oracle(const SpectrumGrid& pf, double eta, int n_quad);

/// Quadrature of the derivative, (2a)^{-1} integral (1-tau)^3 g'((1-tau)w).
SpectrumGrid g_eta_oracle_derivative(const SpectrumGrid& pf, double eta,
                                     int n_quad);

/// d(w) = 3 g(w) + w g'(w), from a smoothed spectrum and its derivative.
SpectrumGrid data_term(const SpectrumGrid& g_smooth,
                       const SpectrumGrid& g_smooth_deriv);

/// Filter width balancing smoothing bias against noise variance:
/// (sigma^4 / m)^{1/6} for sigma >= 1, (sigma^2 / m)^{1/6} for sigma < 1,
/// floored at the frequency resolution.
double choose_smoothing_width(double sigma, std::int64_t m, double domega);

enum class Parametrization { sqrt, direct_projected };

struct OptimizerConfig {
  int max_iters = 3000;
  double grad_tol = 1e-6;  // relative to the data-term norm
  double armijo = 1e-4;
  Parametrization parametrization = Parametrization::sqrt;

  // eta search protocol
  double eta_lo = 0.05;
  double eta_hi = 0.40;
  std::vector<double> eta_inits{0.10, 0.15, 0.20, 0.25, 0.30, 0.35};
  double boundary_margin = 0.02;
  int joint_outer_iters = 160;
  int joint_inner_iters = 25;

  std::optional<double> l_override;

  void validate() const;
};

struct EtaCandidate {
  double eta_init = 0.0;
  double eta_learned = 0.0;
  double final_loss = 0.0;
  bool discarded = false;
};

struct EstimateReport {
  SpectrumGrid pf_hat;
  bool eta_is_oracle = true;
  double eta_used = 0.0;             // value driving the constants
  std::optional<double> eta_hat;     // learned value; empty in oracle mode
  std::vector<double> loss_trace;    // nonincreasing
  double l_smooth = 0.0;
  std::vector<EtaCandidate> candidates;
  bool converged = false;
  int iterations = 0;
  double final_loss = 0.0;
  double grad_norm = 0.0;
  double sigma_used = 0.0;
  std::int64_t m_observations = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

/// Minimizes ||(I - L_{c0}) g - c1 L_{c2} d||_2^2 by backtracking gradient
/// descent; nonnegativity of the estimate comes from the parametrization.
/// Non-convergence is reported through the flag, never silently.
EstimateReport invert_known_eta(const SpectrumGrid& d, double eta,
                                const OptimizerConfig& cfg);

/// Learns (g, eta) jointly from a data term: for every eta init, alternates
/// blocks of gradient steps on g with a projected finite-difference step on
/// eta; candidates ending near the bounds are discarded and the smallest
/// remaining loss wins. Throws EtaEstimationError when every candidate is
/// discarded.
EstimateReport joint_optimize(const SpectrumGrid& d_tilde,
                              const OptimizerConfig& cfg);

/// The full estimator: smooths the debiased mean spectrum with width
/// l_override or choose_smoothing_width(sigma, m), builds the data term and
/// inverts with the given eta (or jointly when eta is empty).
EstimateReport estimate_noisy(const SpectrumGrid& batch_mean,
                              std::optional<double> eta, double sigma,
                              std::int64_t m, const OptimizerConfig& cfg);

/// Recovers a signal from its power spectrum under the real-positive-FT
/// assumption: fhat = sqrt(pf), inverse transform, real part. Negative bins
/// are clamped to zero; the count is reported through clamped if given.
SampledSignal recover_signal_real_positive(const SpectrumGrid& pf,
                                           const SpatialGrid& grid,
                                           int* clamped = nullptr);

class EtaEstimationError : public Error {
 public:
  using Error::Error;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace mra
