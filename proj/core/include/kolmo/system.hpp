#pragma once

#include <Eigen/SparseCore>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kolmo/multiindex.hpp"

namespace kolmo {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

/// Hermite expansion of each nonlinear drift function c_i over its support:
/// c_i(x) = sum_v coef * H_v(x), with H_v the normalized Hermite product of the
/// system's measure and v a multi-index restricted to support[i].
struct CoefficientTable {
    struct Term {
        MultiIndex v;
        double coef;
    };
    std::size_t n_vars = 0;
    std::vector<std::vector<std::size_t>> support;
    std::vector<std::vector<Term>> terms;

    /// Throws ConfigError on a term that touches a variable outside its support.
    void validate() const;
    unsigned sparsity() const;
};

CoefficientTable parse_coefficient_table(std::istream& in);
CoefficientTable read_coefficient_table(const std::string& path);
void write_coefficient_table(std::ostream& out, const CoefficientTable& table);

/// Builds the raw (unsymmetrized) C matrix over a basis.
using CGenerator = std::function<SparseMatrix(const BasisSet&)>;

/// Pointwise nonlinear drift c(x); writes N values.
using DriftFunction = std::function<void(std::span<const double> x, std::span<double> out)>;

/// Drift description: dX_i = -lambda_i X_i dt + (c_i(X) + sum_j b_ij X_j) dt + sqrt(q) dW_i.
struct SystemSpec {
    std::string name;
    Rates rates;
    double q = 1.0;
    SparseMatrix b;
    DriftFunction nonlinear;
    std::variant<std::monostate, CGenerator, CoefficientTable> c_route;
    double J = 0.0;
    double J1 = 0.0;
    unsigned s = 1;
    bool divergence_free_by_construction = false;

    std::size_t dim() const { return rates.size(); }
    bool has_nonlinear() const { return static_cast<bool>(nonlinear); }
    bool bounded() const { return std::isfinite(J); }
    /// gamma = J sqrt(2/q); infinite when J is.
    double gamma() const;
    double kappa() const { return rates.back() / rates.front(); }

    /// Full drift -lambda_i x_i + c_i(x) + (b x)_i.
    void drift(std::span<const double> x, std::span<double> out) const;

    /// Checks rates, q, and the shape of b. Throws ConfigError.
    void validate() const;
};

/// beta_ij = b_ij sqrt(lambda_i / lambda_j). Throws ModelError if beta is not skew.
SparseMatrix beta_matrix(const SystemSpec& spec, double tol = 1e-12);

/// A SystemSpec with only linear drift b (no c).
SystemSpec linear_system(std::string name, Rates rates, double q, SparseMatrix b);

/// Evaluates c(x) from a coefficient table (Hermite sums).
DriftFunction drift_from_table(const CoefficientTable& table, Rates rates, double q);

}  // namespace kolmo
