#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "kolmo/multiindex.hpp"
#include "kolmo/system.hpp"

namespace kolmo {

enum class OperatorKind { diagonal, skew };

/// Matrix over a BasisSet in basis order. Skew operators satisfy M^T = -M.
struct SparseOperator {
    SparseMatrix mat;
    OperatorKind kind = OperatorKind::skew;

    Eigen::Index dim() const { return mat.rows(); }
    std::size_t max_column_nnz() const;
};

// Ladder-operator algebra on sparse Fock vectors. The vacuum (all-zero index)
// is representable here; it is dropped when projecting onto a BasisSet.
using FockVector = std::unordered_map<MultiIndex, double, MultiIndexHash>;

FockVector lower(const FockVector& v, std::size_t i);
FockVector raise(const FockVector& v, std::size_t i);
/// (a_i + a_i^dagger) v.
FockVector position(const FockVector& v, std::size_t i);
void axpy(FockVector& y, double a, const FockVector& x);

/// Column-by-column matrix of a linear map given on basis vectors; rows
/// outside the basis are discarded.
SparseMatrix matrix_from_action(const BasisSet& basis, const std::function<FockVector(const MultiIndex&)>& action);

SparseOperator assemble_A(const BasisSet& basis);
SparseOperator assemble_B(const BasisSet& basis, const SystemSpec& spec);

struct CAssemblyInfo {
    double raw_asymmetry = 0.0;  // max |C + C^T| / max |C|
    bool warned = false;
};

/// Raw asymmetry above this is reported; above kCHardAsymmetry it is an error.
inline constexpr double kCWarnAsymmetry = 1e-10;
inline constexpr double kCHardAsymmetry = 1e-6;

/// Projected nonlinear-drift operator, symmetrized to exact skewness.
SparseOperator assemble_C(const BasisSet& basis, const SystemSpec& spec, CAssemblyInfo* info = nullptr);

/// Exact C from a Hermite coefficient table (normalized triple products).
SparseMatrix coefficient_table_C(const BasisSet& basis, const CoefficientTable& table, double q);

/// C by tensor Gauss-Hermite quadrature of the matrix-element integral.
/// Intended for N <= 3.
SparseMatrix quadrature_C(const BasisSet& basis, double q, const DriftFunction& c, unsigned nodes_per_axis);

/// Quadratic drift c_k(x) = sum coef * x_i * x_j.
struct QuadraticTerm {
    std::size_t k, i, j;
    double coef;
};
/// Ladder-operator assembly of C for a quadratic drift (all four ladder terms kept).
SparseMatrix quadratic_C(const BasisSet& basis, double q, const std::vector<QuadraticTerm>& terms);

struct DivergenceReport {
    double nde1 = 0.0;  // max |sum_i d c_i / d x_i|
    double nde2 = 0.0;  // max |sum_i lambda_i x_i c_i| / (1 + scale)
    double nde3 = 0.0;  // max |lambda_i b_ij + lambda_j b_ji|
    std::size_t points = 0;
    bool pass = false;
};

/// Residuals of the three divergence-free conditions at random points
/// (finite differences for NDE1, h = 1e-3, fourth order).
DivergenceReport verify_divergence_free(const SystemSpec& spec, std::size_t n_points = 64, std::uint64_t seed = 7);

/// Largest singular value of M by power iteration on M^T M.
double power_norm(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_t, Eigen::Index dim,
                  int iterations = 200, double tol = 1e-6, std::uint64_t seed = 11);
double power_norm(const SparseMatrix& m, int iterations = 200, double tol = 1e-6);

struct SparsityReport {
    std::string name;
    std::size_t max_column_nnz = 0;
    double nnz_bound = 0.0;
    double norm = 0.0;
    double norm_bound = 0.0;  // infinity when not applicable
    bool nnz_ok = false;
    bool norm_ok = false;
    bool norm_applicable = true;
};

/// Sparsity and norm checks for the projected C: column nnz <= K (K+1)^s, ||C|| <= gamma sqrt(R).
SparsityReport sparsity_audit_C(const SparseOperator& c, const BasisSet& basis, const SystemSpec& spec);
/// Sparsity and norm checks for the projected B: column nnz <= s K (K+1), ||B|| <= s J1 K sqrt(kappa).
SparsityReport sparsity_audit_B(const SparseOperator& b, const BasisSet& basis, const SystemSpec& spec);
/// ||A|| = max lambda_m <= R.
SparsityReport sparsity_audit_A(const SparseOperator& a, const BasisSet& basis);

}  // namespace kolmo
