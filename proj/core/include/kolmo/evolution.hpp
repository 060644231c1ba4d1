#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kolmo/multiindex.hpp"
#include "kolmo/operators.hpp"
#include "kolmo/system.hpp"

namespace kolmo {

/// Coefficients over a BasisSet at time t.
struct KEState {
    Eigen::VectorXd psi;
    double t = 0.0;

    double norm() const { return psi.norm(); }
    bool finite() const { return psi.allFinite(); }
};

/// Projected A, B, C on one basis.
struct KEOperators {
    SparseOperator A;
    SparseOperator B;
    SparseOperator C;
    Eigen::VectorXd a_diag;  // lambda_m in basis order

    Eigen::Index dim() const { return a_diag.size(); }
    /// -A + B + C.
    SparseMatrix generator() const;
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
};

KEOperators assemble_operators(const BasisSet& basis, const SystemSpec& spec, CAssemblyInfo* info = nullptr);
/// Operators built from explicit matrices (tests and toy models).
KEOperators make_operators(const Eigen::VectorXd& a_diag, SparseMatrix b, SparseMatrix c);

enum class EvolutionMethod { reference, krylov, trotter };

struct ReferenceOptions {
    double rtol = 1e-9;
    double atol = 1e-14;
    double initial_step = 1e-3;
    double min_step = 1e-13;  // relative to max(1, t)
};

/// Adaptive Dormand-Prince 5(4) with dense output, sampled at the given
/// non-decreasing times (all >= psi0.t). Throws NumericalError on step underflow.
std::vector<KEState> evolve_reference(const KEState& psi0, const KEOperators& ops, std::span<const double> times,
                                      const ReferenceOptions& opt = {});
KEState evolve_reference(const KEState& psi0, const KEOperators& ops, double t, const ReferenceOptions& opt = {});

struct KrylovOptions {
    int dim = 30;
    double tol = 1e-10;
    int max_substeps = 100000;
};

/// exp(t M) v by restarted Arnoldi with a posteriori error control on each substep.
Eigen::VectorXd expv(double t, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                     const Eigen::VectorXd& v, const KrylovOptions& opt = {});
Eigen::VectorXd expv(double t, const SparseMatrix& m, const Eigen::VectorXd& v, const KrylovOptions& opt = {});

KEState evolve_krylov(const KEState& psi0, const KEOperators& ops, double t, const KrylovOptions& opt = {});

/// Dense exponentials are used up to this dimension, Krylov above.
inline constexpr Eigen::Index kDenseExpLimit = 2000;

/// exp(t (-A + B + C)) psi0 by dense Pade scaling and squaring. Throws ResourceError
/// above kDenseExpLimit.
KEState evolve_dense(const KEState& psi0, const KEOperators& ops, double t);

/// ell steps of S(tau) = exp(-tau A) exp(tau B) exp(tau C). Returns the state after
/// every step (ell + 1 entries including psi0).
std::vector<KEState> trotter_trajectory(const KEState& psi0, const KEOperators& ops, double t, unsigned ell);
KEState evolve_trotter(const KEState& psi0, const KEOperators& ops, double t, unsigned ell);

/// Right-hand side of the Trotter error estimate with unit constant:
/// (t^2 / ell) (R^2 + J1^2 K^2 kappa + gamma^2 R) ||phi(0)||.
double trotter_bound(double t, unsigned ell, double R, unsigned K, const SystemSpec& spec, double norm0);

struct TrotterStudy {
    std::vector<unsigned> steps;
    std::vector<double> errors;
    std::vector<double> bounds;  // empty unless the system has finite J
    double slope = 0.0;          // of -log(error) against log(ell)
};

TrotterStudy trotter_convergence(const KEState& psi0, const KEOperators& ops, double t, std::span<const unsigned> steps,
                                 const BasisSet* basis = nullptr, const SystemSpec* spec = nullptr);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Coefficients of a small-basis vector placed into a larger basis (zeros elsewhere).
/// Throws ConfigError if an index of `from` is missing in `to`.
Eigen::VectorXd embed(const Eigen::VectorXd& v, const BasisSet& from, const BasisSet& to);
/// Restriction of a large-basis vector onto a subset basis.
Eigen::VectorXd restrict_to(const Eigen::VectorXd& v, const BasisSet& from, const BasisSet& to);

struct RegularizationReport {
    bool applicable = true;
    std::string status;
    double r_small = 0.0;
    double r_large = 0.0;
    unsigned K_small = 0;
    unsigned K_large = 0;
    double norm0_sq = 0.0;
    double measured = 0.0;  // sup_t ||psi_ref - phi||^2
    double t_at_sup = 0.0;
    double bound = 0.0;     // 3 gamma^2 / (2 r) ||psi(0)||^2
    bool pass = false;
};

/// Compares the evolution on the r_small truncation against the r_large one
/// on an evenly spaced grid of `samples` times over [0, t]. `initial` builds
/// psi(0) over a given basis.
RegularizationReport regularization_gap(const SystemSpec& spec,
                                        const std::function<Eigen::VectorXd(const BasisSet&)>& initial, double t,
                                        double r_small, double r_large, unsigned samples = 101);

struct SmoothingRow {
    double t = 0.0;
    double a_norm = 0.0;  // ||A^{1/2} e^{-t A}||
    double a_bound = 0.0;
    double c_norm = 0.0;  // ||C e^{-t A}||, NaN when not computed
    double c_bound = 0.0;
    bool a_ok = false;
    bool c_ok = false;
    bool c_applicable = false;
};

/// Smoothing estimates ||A^{1/2} e^{-tA}|| <= (kappa/t)^{1/2}/2 and
/// ||C e^{-tA}|| <= gamma (kappa/t)^{1/2}/2 by power iteration.
std::vector<SmoothingRow> smoothing_bound_audit(const KEOperators& ops, const SystemSpec& spec,
                                                std::span<const double> times);

/// CSV rows "t,coordinate,value"; coordinate is the multi-index as "var:order" pairs.
void write_trajectory_csv(std::ostream& out, const BasisSet& basis, std::span<const KEState> traj);

}  // namespace kolmo
