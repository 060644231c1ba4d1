#pragma once

#include <span>
#include <vector>

#include "kolmo/multiindex.hpp"

namespace kolmo {

/// Scalings of the Gaussian reference measure mu ~ exp(-sum lambda_i x_i^2 / q).
class HermiteContext {
public:
    HermiteContext(Rates rates, double q);

    std::size_t dim() const { return rates_.size(); }
    const Rates& rates() const { return rates_; }
    double q() const { return q_; }
    /// s_i = sqrt(2 lambda_i / q).
    double scale(std::size_t i) const { return scales_[i]; }
    const std::vector<double>& scales() const { return scales_; }
    /// Variance of mu along x_i: q / (2 lambda_i).
    double variance(std::size_t i) const { return 1.0 / (scales_[i] * scales_[i]); }

private:
    Rates rates_;
    double q_;
    std::vector<double> scales_;
};

/// Largest per-variable degree accepted by the normalized evaluators.
inline constexpr unsigned kMaxHermiteDegree = 150;

/// Probabilist's Hermite polynomial He_n(x).
double he(unsigned n, double x);

/// He_0(x) .. He_n(x) divided by sqrt(k!), by the normalized recurrence.
std::vector<double> he_normalized_all(unsigned n, double x);

/// prod_i (m_i!)^{-1/2} He_{m_i}(x_i s_i).
double h_norm(const MultiIndex& m, std::span<const double> x, const HermiteContext& ctx);

/// prod_i (m_i!)^{-1/2} (x_i s_i)^{m_i}; equals the mu-average of H_m(x + y).
double umbral_shift_weight(const MultiIndex& m, std::span<const double> x, const HermiteContext& ctx);

/// sum_{n=1}^{n_max} He_n(0)^2 / n!.
double dirac_partial_norm(unsigned n_max);
/// Single term He_n(0)^2 / n! (zero for odd n).
double dirac_term(unsigned n);

double log_factorial(unsigned n);

/// E[h_a h_b h_c] under N(0,1) for normalized h_k = He_k / sqrt(k!).
double hermite_triple(unsigned a, unsigned b, unsigned c);

/// Gauss-Hermite rule for the standard normal density (weights sum to 1).
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussRule gauss_hermite(unsigned n);

}  // namespace kolmo
