#include "kolmo/systems.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "kolmo/error.hpp"

namespace kolmo {

using std::numbers::pi;

// ---------------------------------------------------------------- oscillator

double oscillator_omega(OmegaProfile p, double r2) {
    return p == OmegaProfile::polynomial ? 1.0 + r2 : 1.0 / (1.0 + r2);
}

SparseMatrix oscillator_C_closed_form(const BasisSet& basis, const OscillatorSpec& spec) {
    if (spec.profile != OmegaProfile::polynomial)
        throw ConfigError("closed-form oscillator C requires the polynomial omega profile");
    if (basis.dim() != 2) throw ConfigError("oscillator basis must have two variables");
    const double eta = spec.eta();
    return matrix_from_action(basis, [eta](const MultiIndex& m) {
        const FockVector v{{m, 1.0}};
        FockVector g = raise(lower(v, 0), 1);
        axpy(g, -1.0, raise(lower(v, 1), 0));
        FockVector out = g;
        axpy(out, eta, position(position(g, 0), 0));
        axpy(out, eta, position(position(g, 1), 1));
        return out;
    });
}

SystemSpec oscillator_system(const OscillatorSpec& spec) {
    if (!(spec.lambda > 0.0) || !(spec.q > 0.0)) throw ConfigError("oscillator needs lambda > 0 and q > 0");
    SystemSpec s;
    s.name = spec.profile == OmegaProfile::polynomial ? "oscillator" : "oscillator_bounded";
    s.rates = {spec.lambda, spec.lambda};
    s.q = spec.q;
    s.b.resize(2, 2);
    const OmegaProfile prof = spec.profile;
    s.nonlinear = [prof](std::span<const double> x, std::span<double> out) {
        const double w = oscillator_omega(prof, x[0] * x[0] + x[1] * x[1]);
        out[0] = x[1] * w;
        out[1] = -x[0] * w;
    };
    if (prof == OmegaProfile::polynomial) {
        s.c_route = CGenerator([spec](const BasisSet& b) { return oscillator_C_closed_form(b, spec); });
        s.J = std::numeric_limits<double>::infinity();
    } else {
        const auto c = s.nonlinear;
        const double q = spec.q;
        const unsigned nodes = spec.quadrature_nodes;
        s.c_route = CGenerator([c, q, nodes](const BasisSet& b) { return quadrature_C(b, q, c, nodes); });
        s.J = 0.5;  // max_r r / (1 + r^2)
    }
    s.J1 = 0.0;
    s.s = 2;
    s.divergence_free_by_construction = true;
    s.validate();
    return s;
}

// ---------------------------------------------------------------- Navier-Stokes

double Wavenumber::norm() const { return std::sqrt(double(norm2())); }

std::vector<Wavenumber> nse_wavenumbers(std::size_t n) {
    std::vector<Wavenumber> out;
    if (n == 0) return out;
    for (int radius = 1;; ++radius) {
        out.clear();
        for (int k1 = 0; k1 <= radius; ++k1)
            for (int k2 = -radius; k2 <= radius; ++k2) {
                if (k1 == 0 && k2 <= 0) continue;
                if (k1 * k1 + k2 * k2 <= radius * radius) out.push_back({k1, k2});
            }
        if (out.size() >= n) break;
    }
    std::sort(out.begin(), out.end(), [](const Wavenumber& a, const Wavenumber& b) {
        if (a.norm2() != b.norm2()) return a.norm2() < b.norm2();
        return std::pair(a.k1, a.k2) < std::pair(b.k1, b.k2);
    });
    out.resize(n);
    return out;
}

Rates NSESpec::rates() const {
    Rates r(eigenvalues.size());
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = nu * eigenvalues[k];
    return r;
}

NSESpec make_nse(std::size_t n_modes, double nu, double q) {
    if (n_modes < 1) throw ConfigError("NSE needs at least one mode");
    if (!(nu > 0.0) || !(q > 0.0)) throw ConfigError("NSE needs nu > 0 and q > 0");
    NSESpec s;
    s.n_modes = n_modes;
    s.nu = nu;
    s.q = q;
    s.modes = nse_wavenumbers(n_modes);
    for (const auto& k : s.modes) {
        if (k.k1 < 0 || (k.k1 == 0 && k.k2 <= 0)) throw ConfigError("wavenumber violates the half-plane convention");
        s.eigenvalues.push_back(4.0 * pi * pi * k.norm2());
    }
    return s;
}

double nse_mode(const Wavenumber& k, double xi1, double xi2, int component) {
    const double dir = component == 0 ? k.k2 : -k.k1;
    return dir / k.norm() * std::sqrt(2.0) * std::sin(2.0 * pi * (k.k1 * xi1 + k.k2 * xi2));
}

namespace {

// delta_{k,i+j} + delta_{k,i-j} - delta_{k,j-i}
int wave_delta(const Wavenumber& i, const Wavenumber& j, const Wavenumber& k) {
    int d = 0;
    if (k.k1 == i.k1 + j.k1 && k.k2 == i.k2 + j.k2) ++d;
    if (k.k1 == i.k1 - j.k1 && k.k2 == i.k2 - j.k2) ++d;
    if (k.k1 == j.k1 - i.k1 && k.k2 == j.k2 - i.k2) --d;
    return d;
}

// (i_perp . j)(j . k) with i_perp = (i2, -i1)
double wave_geometry(const Wavenumber& i, const Wavenumber& j, const Wavenumber& k) {
    const double ipj = double(i.k2) * j.k1 - double(i.k1) * j.k2;
    const double jk = double(j.k1) * k.k1 + double(j.k2) * k.k2;
    return ipj * jk;
}

struct Triad {
    std::size_t i, j;
    double g;  // geometry * delta / (|i| |k| |j|^2)
};

std::vector<std::vector<Triad>> nse_triads(const NSESpec& spec) {
    const std::size_t N = spec.modes.size();
    std::vector<std::vector<Triad>> out(N);
    for (std::size_t k = 0; k < N; ++k)
        for (std::size_t i = 0; i < N; ++i) {
            if (i == k) continue;
            for (std::size_t j = 0; j < N; ++j) {
                if (j == k || j == i) continue;
                const auto &ki = spec.modes[i], &kj = spec.modes[j], &kk = spec.modes[k];
                const int d = wave_delta(ki, kj, kk);
                if (d == 0) continue;
                const double geo = wave_geometry(ki, kj, kk);
                if (geo == 0.0) continue;
                out[k].push_back({i, j, geo * d / (ki.norm() * kk.norm() * kj.norm2())});
            }
        }
    return out;
}

}  // namespace

double nse_trilinear(const Wavenumber& i, const Wavenumber& j, const Wavenumber& k) {
    const int d = wave_delta(i, j, k);
    if (d == 0) return 0.0;
    return std::sqrt(2.0) * pi * wave_geometry(i, j, k) * d / (i.norm() * j.norm() * k.norm());
}

std::vector<QuadraticTerm> nse_quadratic_terms(const NSESpec& spec) {
    std::vector<QuadraticTerm> terms;
    const std::size_t N = spec.modes.size();
    for (std::size_t k = 0; k < N; ++k)
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                if (i == k || j == k || i == j) continue;
                const double b = nse_trilinear(spec.modes[i], spec.modes[j], spec.modes[k]);
                if (b != 0.0) terms.push_back({k, i, j, -b});
            }
    return terms;
}

SparseMatrix nse_C_elements(const BasisSet& basis, const NSESpec& spec) {
    if (basis.dim() != spec.modes.size()) throw ConfigError("basis and NSE mode count differ");
    const auto triads = nse_triads(spec);
    const auto& lam = spec.eigenvalues;
    const auto n = static_cast<Eigen::Index>(basis.size());
    std::vector<Triplet> trip;
    for (std::size_t col = 0; col < basis.size(); ++col) {
        const MultiIndex& nn = basis[col];
        for (const auto& e : nn.entries()) {
            const std::size_t k = e.var;
            const MultiIndex base = nn.shifted(k, -1);
            for (const auto& t : triads[k]) {
                const double pref = -0.5 * std::sqrt(e.order * spec.q * lam[k] / (spec.nu * lam[t.i])) * t.g;
                const double ni = nn.order(t.i), nj = nn.order(t.j);
                auto emit = [&](int di, int dj, double amp) {
                    if (amp == 0.0) return;
                    const MultiIndex m = base.shifted(t.i, di).shifted(t.j, dj);
                    if (auto row = basis.find(m))
                        trip.emplace_back(static_cast<int>(*row), static_cast<int>(col), pref * amp);
                };
                emit(+1, +1, std::sqrt((1 + ni) * (1 + nj)));
                if (nj > 0) emit(+1, -1, std::sqrt((1 + ni) * nj));
                if (ni > 0) emit(-1, +1, std::sqrt(ni * (1 + nj)));
            }
        }
    }
    SparseMatrix c(n, n);
    c.setFromTriplets(trip.begin(), trip.end());
    return c;
}

SystemSpec nse_system(const NSESpec& spec) {
    SystemSpec s;
    s.name = "nse";
    s.rates = spec.rates();
    s.q = spec.q;
    s.b.resize(spec.n_modes, spec.n_modes);
    const auto terms = nse_quadratic_terms(spec);
    s.nonlinear = [terms](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (const auto& t : terms) out[t.k] += t.coef * x[t.i] * x[t.j];
    };
    s.c_route = CGenerator([spec](const BasisSet& b) { return nse_C_elements(b, spec); });
    s.J = std::numeric_limits<double>::infinity();
    s.J1 = 0.0;
    std::vector<std::vector<std::size_t>> support(spec.n_modes);
    for (const auto& t : terms) {
        support[t.k].push_back(t.i);
        support[t.k].push_back(t.j);
    }
    unsigned smax = 1;
    for (auto& sup : support) {
        std::sort(sup.begin(), sup.end());
        sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
        smax = std::max<unsigned>(smax, static_cast<unsigned>(sup.size()));
    }
    s.s = smax;
    s.divergence_free_by_construction = true;
    s.validate();
    return s;
}

std::pair<double, double> taylor_green(double t, double x, double y, double nu) {
    const double decay = std::exp(-8.0 * pi * pi * nu * t);
    return {std::sqrt(2.0) * std::sin(2 * pi * x) * std::cos(2 * pi * y) * decay,
            -std::sqrt(2.0) * std::cos(2 * pi * x) * std::sin(2 * pi * y) * decay};
}

std::vector<double> taylor_green_projection(const NSESpec& spec) {
    // Midpoint rule on a uniform grid is exact for the low trigonometric degrees involved.
    constexpr int G = 64;
    std::vector<double> x0(spec.modes.size(), 0.0);
    for (int a = 0; a < G; ++a)
        for (int b = 0; b < G; ++b) {
            const double xi1 = (a + 0.5) / G, xi2 = (b + 0.5) / G;
            const auto [u1, u2] = taylor_green(0.0, xi1, xi2, spec.nu);
            for (std::size_t k = 0; k < spec.modes.size(); ++k)
                x0[k] += (u1 * nse_mode(spec.modes[k], xi1, xi2, 0) + u2 * nse_mode(spec.modes[k], xi1, xi2, 1)) /
                         (G * G);
        }
    for (auto& v : x0)
        if (std::abs(v) < 1e-14) v = 0.0;
    return x0;
}

std::vector<double> nse_probe_weights(const NSESpec& spec, double xi1, double xi2, int component) {
    std::vector<double> w(spec.modes.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = nse_mode(spec.modes[k], xi1, xi2, component);
    return w;
}

// ---------------------------------------------------------------- clock circuits

namespace {

void check_orthogonal(const Eigen::MatrixXd& m, const std::string& name) {
    if (m.rows() != m.cols()) throw ConfigError("gate " + name + " is not square");
    if (!m.allFinite()) throw ConfigError("gate " + name + " has non-finite entries");
    const double err = (m.transpose() * m - Eigen::MatrixXd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
    if (err > 1e-12) throw ConfigError("gate " + name + " is not real orthogonal (error " + std::to_string(err) + ")");
}

Gate make_gate(std::string name, std::vector<unsigned> targets, Eigen::MatrixXd m) {
    return gate_matrix(std::move(targets), std::move(m), std::move(name));
}

}  // namespace

Gate gate_matrix(std::vector<unsigned> targets, Eigen::MatrixXd m, std::string name) {
    auto sorted = targets;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("gate " + name + " repeats a target qubit");
    if (m.rows() != (Eigen::Index{1} << targets.size()))
        throw ConfigError("gate " + name + " size does not match its target count");
    check_orthogonal(m, name);
    return {std::move(name), std::move(targets), std::move(m)};
}

Gate gate_x(unsigned q) {
    Eigen::MatrixXd m(2, 2);
    m << 0, 1, 1, 0;
    return make_gate("x", {q}, m);
}

Gate gate_z(unsigned q) {
    Eigen::MatrixXd m(2, 2);
    m << 1, 0, 0, -1;
    return make_gate("z", {q}, m);
}

Gate gate_h(unsigned q) {
    Eigen::MatrixXd m(2, 2);
    m << 1, 1, 1, -1;
    return make_gate("h", {q}, m / std::sqrt(2.0));
}

Gate gate_ry(double theta, unsigned q) {
    Eigen::MatrixXd m(2, 2);
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    m << c, -s, s, c;
    return make_gate("ry", {q}, m);
}

Gate gate_cnot(unsigned control, unsigned target) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
    m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1.0;
    return make_gate("cnot", {control, target}, m);
}

Gate gate_cz(unsigned a, unsigned b) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(4, 4);
    m(3, 3) = -1.0;
    return make_gate("cz", {a, b}, m);
}

Circuit parse_circuit(std::istream& in) {
    Circuit c;
    bool have_n = false;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw ConfigError("circuit line " + std::to_string(lineno) + ": " + msg);
    };
    auto qubit = [&](std::istringstream& ls) {
        long q = -1;
        if (!(ls >> q) || q < 0 || q >= static_cast<long>(c.n_qubits)) fail("bad qubit index");
        return static_cast<unsigned>(q);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        std::string name;
        if (!(ls >> name)) continue;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (name == "qubits") {
            long n = -1;
            if (!(ls >> n) || n < 0 || n > 16) fail("qubit count must be in [0, 16]");
            c.n_qubits = static_cast<unsigned>(n);
            have_n = true;
            continue;
        }
        if (!have_n) fail("'qubits n' must come first");
        try {
            if (name == "x") {
                c.gates.push_back(gate_x(qubit(ls)));
            } else if (name == "z") {
                c.gates.push_back(gate_z(qubit(ls)));
            } else if (name == "h") {
                c.gates.push_back(gate_h(qubit(ls)));
            } else if (name == "ry") {
                double th = 0.0;
                if (!(ls >> th)) fail("ry needs an angle");
                c.gates.push_back(gate_ry(th, qubit(ls)));
            } else if (name == "cnot" || name == "cx") {
                const unsigned a = qubit(ls);
                c.gates.push_back(gate_cnot(a, qubit(ls)));
            } else if (name == "cz") {
                const unsigned a = qubit(ls);
                c.gates.push_back(gate_cz(a, qubit(ls)));
            } else if (name == "matrix") {
                std::vector<unsigned> targets;
                std::string tok;
                while (ls >> tok && tok != ":") {
                    std::istringstream ts(tok);
                    targets.push_back(qubit(ts));
                }
                if (tok != ":") fail("matrix gate needs ':' before its entries");
                const Eigen::Index d = Eigen::Index{1} << targets.size();
                Eigen::MatrixXd m(d, d);
                for (Eigen::Index r = 0; r < d; ++r)
                    for (Eigen::Index col = 0; col < d; ++col)
                        if (!(ls >> m(r, col))) fail("matrix gate has too few entries");
                if (ls >> tok) fail("matrix gate has too many entries");
                c.gates.push_back(gate_matrix(targets, m));
            } else {
                fail("unknown gate '" + name + "'");
            }
        } catch (const ConfigError& e) {
            const std::string what = e.what();
            if (what.rfind("circuit line", 0) == 0) throw;
            fail(what);
        }
        if (ls >> name) fail("trailing tokens");
    }
    if (!have_n) throw ConfigError("circuit has no 'qubits' line");
    return c;
}

Circuit read_circuit(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open circuit file " + path);
    return parse_circuit(f);
}

Eigen::MatrixXd gate_operator(const Gate& g, unsigned n_qubits) {
    const std::size_t dim = std::size_t{1} << n_qubits;
    const std::size_t r = g.targets.size();
    for (unsigned t : g.targets)
        if (t >= n_qubits) throw ConfigError("gate target outside the register");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, dim);
    auto bitpos = [&](unsigned q) { return n_qubits - 1 - q; };
    for (std::size_t s = 0; s < dim; ++s) {
        std::size_t loc = 0;
        for (std::size_t a = 0; a < r; ++a) loc = (loc << 1) | ((s >> bitpos(g.targets[a])) & 1u);
        for (std::size_t row = 0; row < (std::size_t{1} << r); ++row) {
            const double v = g.matrix(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(loc));
            if (v == 0.0) continue;
            std::size_t s2 = s;
            for (std::size_t a = 0; a < r; ++a) {
                const std::size_t bit = (row >> (r - 1 - a)) & 1u;
                const auto p = bitpos(g.targets[a]);
                s2 = (s2 & ~(std::size_t{1} << p)) | (bit << p);
            }
            out(static_cast<Eigen::Index>(s2), static_cast<Eigen::Index>(s)) += v;
        }
    }
    return out;
}

Eigen::MatrixXd circuit_unitary(const Circuit& c) {
    const auto dim = Eigen::Index{1} << c.n_qubits;
    Eigen::MatrixXd u = Eigen::MatrixXd::Identity(dim, dim);
    for (const auto& g : c.gates) u = gate_operator(g, c.n_qubits) * u;
    return u;
}

Circuit random_circuit(unsigned n, unsigned m, unsigned k, std::uint64_t seed) {
    if (n == 0 || k == 0) throw ConfigError("random circuit needs n >= 1 and k >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> ang(0.0, 2 * pi);
    Circuit c;
    c.n_qubits = n;
    for (unsigned j = 0; j < m; ++j) {
        const unsigned r = 1 + static_cast<unsigned>(rng() % std::min(n, k));
        std::vector<unsigned> qs(n);
        for (unsigned a = 0; a < n; ++a) qs[a] = a;
        std::shuffle(qs.begin(), qs.end(), rng);
        qs.resize(r);
        const unsigned kind = static_cast<unsigned>(rng() % 4);
        if (r == 1 && kind == 0) {
            c.gates.push_back(gate_h(qs[0]));
        } else if (r == 1 && kind == 1) {
            c.gates.push_back(gate_ry(ang(rng), qs[0]));
        } else if (r == 2 && kind == 0) {
            c.gates.push_back(gate_cnot(qs[0], qs[1]));
        } else {
            const auto d = Eigen::Index{1} << r;
            Eigen::MatrixXd a(d, d);
            for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
            Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
            // Re-orthonormalize once to push the residual to round-off.
            Eigen::HouseholderQR<Eigen::MatrixXd> qr2(q);
            q = qr2.householderQ() * Eigen::MatrixXd::Identity(d, d);
            c.gates.push_back(gate_matrix(qs, q, "random"));
        }
    }
    return c;
}

std::vector<double> clock_weights(unsigned m) {
    // Spin-m/2 rotation by pi about y moves |0> to |m>: magnitude (pi/2) sqrt((m-j)(j+1)).
    // The negative sign makes exp(-b0)|0> = +|m>.
    std::vector<double> a(m);
    for (unsigned j = 0; j < m; ++j) a[j] = -0.5 * pi * std::sqrt(double(m - j) * (j + 1.0));
    return a;
}

SparseMatrix clock_drift(const ClockCircuitSpec& spec) {
    const auto& c = spec.circuit;
    const unsigned m = static_cast<unsigned>(c.gates.size());
    const std::size_t d = std::size_t{1} << c.n_qubits;
    const auto N = static_cast<Eigen::Index>((m + 1) * d);
    const auto alpha = clock_weights(m);
    std::vector<Triplet> trip;
    for (unsigned j = 1; j <= m; ++j) {
        const Eigen::MatrixXd U = gate_operator(c.gates[j - 1], c.n_qubits);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t s = 0; s < d; ++s) {
                const double u = U(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
                if (u == 0.0) continue;
                const double v = alpha[j - 1] * u;
                // |j, r><j-1, s| u_rs  and  -|j-1, s><j, r| u_rs
                trip.emplace_back(static_cast<int>(clock_index(j, r, c.n_qubits)),
                                  static_cast<int>(clock_index(j - 1, s, c.n_qubits)), v);
                trip.emplace_back(static_cast<int>(clock_index(j - 1, s, c.n_qubits)),
                                  static_cast<int>(clock_index(j, r, c.n_qubits)), -v);
            }
    }
    SparseMatrix b(N, N);
    b.setFromTriplets(trip.begin(), trip.end());
    return b;
}

SystemSpec clock_system(const ClockCircuitSpec& spec) {
    SparseMatrix b = clock_drift(spec);
    const std::size_t N = static_cast<std::size_t>(b.rows());
    return linear_system("clock", Rates(N, spec.lambda), spec.q, std::move(b));
}

}  // namespace kolmo
