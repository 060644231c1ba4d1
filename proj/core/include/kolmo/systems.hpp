#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kolmo/operators.hpp"
#include "kolmo/system.hpp"

namespace kolmo {

// ---------------------------------------------------------------- oscillator

enum class OmegaProfile {
    polynomial,  // omega = 1 + r^2, unbounded drift
    bounded,     // omega = 1 / (1 + r^2), |c| <= 1/2
};

/// c_1 = x_2 omega(|x|), c_2 = -x_1 omega(|x|), equal rates lambda.
struct OscillatorSpec {
    double lambda = 0.1;
    double q = 0.02;
    OmegaProfile profile = OmegaProfile::polynomial;
    unsigned quadrature_nodes = 240;  // bounded profile only

    double eta() const { return q / (2.0 * lambda); }
};

double oscillator_omega(OmegaProfile p, double r2);

/// Ladder form (I + eta X_1^2 + eta X_2^2)(a_2^dag a_1 - a_1^dag a_2), X = a + a^dag,
/// projected onto the basis. Polynomial profile only.
SparseMatrix oscillator_C_closed_form(const BasisSet& basis, const OscillatorSpec& spec);

/// Polynomial profile uses the closed form, bounded profile uses quadrature.
SystemSpec oscillator_system(const OscillatorSpec& spec);

// ---------------------------------------------------------------- Navier-Stokes

struct Wavenumber {
    int k1 = 0;
    int k2 = 0;
    int norm2() const { return k1 * k1 + k2 * k2; }
    double norm() const;
    bool operator==(const Wavenumber&) const = default;
};

/// First N wavenumbers of the half plane (k1 >= 1, or k1 = 0 and k2 >= 1),
/// ordered by |k|^2 then (k1, k2) lexicographically.
std::vector<Wavenumber> nse_wavenumbers(std::size_t n);

struct NSESpec {
    std::size_t n_modes = 0;
    double nu = 0.1;
    double q = 1e-5;
    std::vector<Wavenumber> modes;
    std::vector<double> eigenvalues;  // 4 pi^2 |k|^2

    /// SDE rates nu * lambda_k.
    Rates rates() const;
};

NSESpec make_nse(std::size_t n_modes, double nu, double q);

/// Mode e_k(xi) = (k_perp / |k|) sqrt(2) sin(2 pi k.xi), component 0 or 1.
double nse_mode(const Wavenumber& k, double xi1, double xi2, int component);

/// Trilinear form b(e_i, e_j, e_k) of the Leray projected advection.
double nse_trilinear(const Wavenumber& i, const Wavenumber& j, const Wavenumber& k);

/// c_k(x) = -sum_ij b(e_i, e_j, e_k) x_i x_j as a term list (zero terms omitted).
std::vector<QuadraticTerm> nse_quadratic_terms(const NSESpec& spec);

/// Closed Kronecker-delta matrix elements of C (three ladder terms).
SparseMatrix nse_C_elements(const BasisSet& basis, const NSESpec& spec);

SystemSpec nse_system(const NSESpec& spec);

/// Analytic Taylor-Green velocity (u1, u2) at (x, y) and time t.
std::pair<double, double> taylor_green(double t, double x, double y, double nu);

/// Coefficients of the t = 0 Taylor-Green field in the modes of spec.
std::vector<double> taylor_green_projection(const NSESpec& spec);

/// Weights w_k with sum_k w_k x_k = component of the velocity at (xi1, xi2).
std::vector<double> nse_probe_weights(const NSESpec& spec, double xi1, double xi2, int component);

// ---------------------------------------------------------------- clock circuits

/// Real orthogonal gate on the listed qubits; qubit 0 is the most significant bit.
struct Gate {
    std::string name;
    std::vector<unsigned> targets;
    Eigen::MatrixXd matrix;
};

struct Circuit {
    unsigned n_qubits = 0;
    std::vector<Gate> gates;
};

Gate gate_x(unsigned q);
Gate gate_z(unsigned q);
Gate gate_h(unsigned q);
Gate gate_ry(double theta, unsigned q);
Gate gate_cnot(unsigned control, unsigned target);
Gate gate_cz(unsigned a, unsigned b);
/// Throws ConfigError unless the matrix is real orthogonal of size 2^targets.
Gate gate_matrix(std::vector<unsigned> targets, Eigen::MatrixXd m, std::string name = "matrix");

/// One gate per line: `x q`, `z q`, `h q`, `ry theta q`, `cnot c t`, `cz a b`,
/// `matrix t1 t2 ... : a00 a01 ...` (row-major). First line: `qubits n`.
Circuit parse_circuit(std::istream& in);
Circuit read_circuit(const std::string& path);

/// Full 2^n x 2^n matrix of one gate.
Eigen::MatrixXd gate_operator(const Gate& g, unsigned n_qubits);
/// U = U_m ... U_1.
Eigen::MatrixXd circuit_unitary(const Circuit& c);

/// Random circuit of m gates on n qubits, each on at most k qubits.
Circuit random_circuit(unsigned n, unsigned m, unsigned k, std::uint64_t seed);

struct ClockCircuitSpec {
    Circuit circuit;
    double lambda = 0.1;
    double q = 0.1;
};

/// Chain weights alpha_j, j = 0..m-1, chosen so that exp(-b0)|0> = |m> for the bare walk.
std::vector<double> clock_weights(unsigned m);

/// b = sum_j alpha_{j-1} (|j><j-1| (x) U_j - |j-1><j| (x) U_j^T); index j * 2^n + s.
SparseMatrix clock_drift(const ClockCircuitSpec& spec);

SystemSpec clock_system(const ClockCircuitSpec& spec);

/// Clock-register index of |j, s>.
inline std::size_t clock_index(std::size_t j, std::size_t s, unsigned n_qubits) { return (j << n_qubits) + s; }

}  // namespace kolmo
