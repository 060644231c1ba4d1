#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kolmo/evolution.hpp"
#include "kolmo/hermite.hpp"
#include "kolmo/multiindex.hpp"

namespace kolmo {

/// u0(x) = prod_i x_i^{d_i}.
struct MonomialObservable {
    static constexpr unsigned max_degree = 6;
    MultiIndex d;

    /// Throws ConfigError unless 1 <= |d| <= max_degree.
    void validate() const;
    double operator()(std::span<const double> x) const;
};

/// Mean of u0 under mu; zero unless every d_i is even.
double observable_mean(const MultiIndex& d, const HermiteContext& ctx);

/// Hermite expansion of prod x_i^{d_i}: pairs (m, coefficient), the zero index carrying the mean.
std::vector<std::pair<MultiIndex, double>> monomial_expansion(const MultiIndex& d, const HermiteContext& ctx);

/// Coefficients of u0 - mean. Throws ConfigError if a term falls outside the basis.
Eigen::VectorXd initial_state(const MonomialObservable& u0, const BasisSet& basis, const HermiteContext& ctx);
/// Linear observable u0(x) = sum_k w_k x_k (zero mean).
Eigen::VectorXd initial_state_linear(std::span<const double> w, const BasisSet& basis, const HermiteContext& ctx);

/// ||psi(0)||^2 = E u0^2 - mean^2 in closed form.
double initial_state_norm_sq(const MultiIndex& d, const HermiteContext& ctx);

/// ||x||_lambda^2 = sum lambda_i x_i^2.
double lambda_norm_sq(std::span<const double> x, const Rates& rates);

/// Exact ||psi_out(x)||^2 = exp(2 ||x||_lambda^2 / q), vacuum included.
double readout_norm_sq(std::span<const double> x, const HermiteContext& ctx);
/// Same with every per-variable order capped at k (no basis restriction).
double truncated_readout_norm_sq(std::span<const double> x, const HermiteContext& ctx, unsigned k);

/// Order k guaranteeing ||psi_out - phi_out|| <= epsilon:
/// max_i 8 lambda_i x_i^2 / (q ln 2) + 2 log2(1/delta), delta = epsilon / (s ||psi_out||).
unsigned truncation_order(std::span<const double> x, const HermiteContext& ctx, double epsilon);

/// Readout coefficients prod (m_i!)^{-1/2} (x_i s_i)^{m_i} restricted to the basis and
/// to per-variable order <= k. The vacuum amplitude (always 1) is kept separately.
struct ReadoutState {
    std::vector<std::pair<std::size_t, double>> entries;  // (basis position, value)
    double vacuum = 1.0;
    unsigned k = 0;
    std::size_t basis_size = 0;

    /// Squared norm of the stored entries plus the vacuum.
    double norm_sq() const;
};

ReadoutState readout_state(std::span<const double> x, const BasisSet& basis, const HermiteContext& ctx, unsigned k);

enum class Centering { centered, uncentered };

/// v(t, x) = <psi_out(x) | psi(t)>, plus the observable mean when uncentered.
double expectation(const KEState& psi, const ReadoutState& out, double mean = 0.0,
                   Centering c = Centering::centered);

}  // namespace kolmo
