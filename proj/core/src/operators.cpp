#include "kolmo/operators.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>

#include "kolmo/error.hpp"
#include "kolmo/hermite.hpp"

namespace kolmo {

std::size_t SparseOperator::max_column_nnz() const {
    std::size_t best = 0;
    for (int k = 0; k < mat.outerSize(); ++k) {
        std::size_t c = 0;
        for (SparseMatrix::InnerIterator it(mat, k); it; ++it)
            if (it.value() != 0.0) ++c;
        best = std::max(best, c);
    }
    return best;
}

FockVector lower(const FockVector& v, std::size_t i) {
    FockVector out;
    for (const auto& [m, a] : v) {
        const unsigned o = m.order(i);
        if (o == 0) continue;
        out[m.shifted(i, -1)] += a * std::sqrt(double(o));
    }
    return out;
}

FockVector raise(const FockVector& v, std::size_t i) {
    FockVector out;
    for (const auto& [m, a] : v) out[m.shifted(i, +1)] += a * std::sqrt(m.order(i) + 1.0);
    return out;
}

FockVector position(const FockVector& v, std::size_t i) {
    FockVector out = raise(v, i);
    axpy(out, 1.0, lower(v, i));
    return out;
}

void axpy(FockVector& y, double a, const FockVector& x) {
    for (const auto& [m, v] : x) y[m] += a * v;
}

SparseMatrix matrix_from_action(const BasisSet& basis,
                                const std::function<FockVector(const MultiIndex&)>& action) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    std::vector<Triplet> trip;
    for (std::size_t col = 0; col < basis.size(); ++col) {
        for (const auto& [m, v] : action(basis[col])) {
            if (v == 0.0) continue;
            if (auto row = basis.find(m)) trip.emplace_back(static_cast<int>(*row), static_cast<int>(col), v);
        }
    }
    SparseMatrix out(n, n);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

SparseOperator assemble_A(const BasisSet& basis) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    SparseMatrix a(n, n);
    a.reserve(Eigen::VectorXi::Constant(n, 1));
    for (Eigen::Index p = 0; p < n; ++p) a.insert(p, p) = basis.weight_at(static_cast<std::size_t>(p));
    a.makeCompressed();
    return {std::move(a), OperatorKind::diagonal};
}

SparseOperator assemble_B(const BasisSet& basis, const SystemSpec& spec) {
    if (basis.dim() != spec.dim()) throw ConfigError("basis and system dimensions differ");
    const SparseMatrix beta = beta_matrix(spec);
    const auto n = static_cast<Eigen::Index>(basis.size());
    // beta by row i: list of (j, beta_ij).
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(spec.dim());
    for (int k = 0; k < beta.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(beta, k); it; ++it)
            if (it.row() != it.col() && it.value() != 0.0)
                rows[it.row()].emplace_back(static_cast<std::size_t>(it.col()), it.value());

    std::vector<Triplet> trip;
    for (std::size_t col = 0; col < basis.size(); ++col) {
        const MultiIndex& m = basis[col];
        for (const auto& e : m.entries()) {
            const std::size_t i = e.var;
            const MultiIndex mi = m.shifted(i, -1);
            for (const auto& [j, bij] : rows[i]) {
                const MultiIndex target = mi.shifted(j, +1);
                if (auto row = basis.find(target))
                    trip.emplace_back(static_cast<int>(*row), static_cast<int>(col),
                                      bij * std::sqrt(double(e.order) * (mi.order(j) + 1.0)));
            }
        }
    }
    SparseMatrix b(n, n);
    b.setFromTriplets(trip.begin(), trip.end());
    b.prune(0.0);
    return {std::move(b), OperatorKind::skew};
}

namespace {

double max_abs(const SparseMatrix& m) {
    double v = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
    return v;
}

}  // namespace

SparseOperator assemble_C(const BasisSet& basis, const SystemSpec& spec, CAssemblyInfo* info) {
    if (basis.dim() != spec.dim()) throw ConfigError("basis and system dimensions differ");
    const auto n = static_cast<Eigen::Index>(basis.size());
    SparseMatrix raw(n, n);
    if (auto* gen = std::get_if<CGenerator>(&spec.c_route)) {
        raw = (*gen)(basis);
    } else if (auto* table = std::get_if<CoefficientTable>(&spec.c_route)) {
        raw = coefficient_table_C(basis, *table, spec.q);
    }
    if (raw.rows() != n || raw.cols() != n) throw ModelError("C generator returned a matrix of the wrong size");

    SparseMatrix rawt = raw.transpose();
    const double scale = max_abs(raw);
    const double asym = scale > 0.0 ? max_abs(SparseMatrix(raw + rawt)) / scale : 0.0;
    if (info) info->raw_asymmetry = asym;
    if (asym > kCHardAsymmetry)
        throw ModelError("projected C is not skew-symmetric (relative asymmetry " + std::to_string(asym) +
                         "); the drift violates the divergence-free conditions");
    if (asym > kCWarnAsymmetry) {
        std::cerr << "warning: " << spec.name << ": raw C asymmetry " << asym << " exceeds " << kCWarnAsymmetry
                  << "; symmetrizing\n";
        if (info) info->warned = true;
    }
    SparseMatrix c = 0.5 * (raw - rawt);
    c.prune(0.0);
    return {std::move(c), OperatorKind::skew};
}

SparseMatrix coefficient_table_C(const BasisSet& basis, const CoefficientTable& table, double q) {
    table.validate();
    if (table.n_vars != basis.dim()) throw ConfigError("coefficient table dimension mismatch");
    const auto& rates = basis.rates();
    const auto n = static_cast<Eigen::Index>(basis.size());
    std::vector<Triplet> trip;

    for (std::size_t col = 0; col < basis.size(); ++col) {
        const MultiIndex& m = basis[col];
        for (const auto& e : m.entries()) {
            const std::size_t i = e.var;
            const double pref = std::sqrt(2.0 * e.order * rates[i] / q);
            const MultiIndex p = m.shifted(i, -1);
            const auto& sup = table.support[i];
            for (const auto& term : table.terms[i]) {
                // Per support variable j, admissible n_j and their triple products.
                std::vector<std::vector<std::pair<unsigned, double>>> choices(sup.size());
                bool empty = false;
                for (std::size_t a = 0; a < sup.size(); ++a) {
                    const unsigned vj = term.v.order(sup[a]);
                    const unsigned pj = p.order(sup[a]);
                    const unsigned lo = vj > pj ? vj - pj : pj - vj;
                    for (unsigned nj = lo; nj <= vj + pj; nj += 2) {
                        const double t = hermite_triple(nj, vj, pj);
                        if (t != 0.0) choices[a].emplace_back(nj, t);
                    }
                    if (choices[a].empty()) empty = true;
                }
                if (empty) continue;
                std::vector<std::size_t> idx(sup.size(), 0);
                while (true) {
                    MultiIndex target = p;
                    double val = pref * term.coef;
                    for (std::size_t a = 0; a < sup.size(); ++a) {
                        const auto [nj, t] = choices[a][idx[a]];
                        target = target.shifted(sup[a], static_cast<int>(nj) - static_cast<int>(target.order(sup[a])));
                        val *= t;
                    }
                    if (auto row = basis.find(target))
                        trip.emplace_back(static_cast<int>(*row), static_cast<int>(col), val);
                    std::size_t a = 0;
                    while (a < sup.size() && ++idx[a] == choices[a].size()) idx[a++] = 0;
                    if (a == sup.size()) break;
                }
            }
        }
    }
    SparseMatrix c(n, n);
    c.setFromTriplets(trip.begin(), trip.end());
    return c;
}

SparseMatrix quadrature_C(const BasisSet& basis, double q, const DriftFunction& c, unsigned nodes_per_axis) {
    const std::size_t N = basis.dim();
    if (N > 3) throw ConfigError("quadrature assembly supports at most 3 variables");
    const auto& rates = basis.rates();
    const HermiteContext ctx(rates, q);
    const GaussRule rule = gauss_hermite(nodes_per_axis);
    const unsigned K = basis.max_order();

    // Columns of H: vacuum first, then the basis.
    const std::size_t B = basis.size() + 1;
    std::size_t pts = 1;
    for (std::size_t d = 0; d < N; ++d) pts *= nodes_per_axis;

    std::vector<std::vector<std::vector<double>>> axis(N);  // axis[d][node][order]
    for (std::size_t d = 0; d < N; ++d)
        for (unsigned k = 0; k < nodes_per_axis; ++k) axis[d].push_back(he_normalized_all(K, rule.nodes[k]));

    Eigen::MatrixXd H(pts, B);
    std::vector<Eigen::VectorXd> wc(N, Eigen::VectorXd(pts));
    std::vector<unsigned> id(N, 0);
    std::vector<double> x(N), cv(N);
    for (std::size_t p = 0; p < pts; ++p) {
        std::size_t rem = p;
        double w = 1.0;
        for (std::size_t d = 0; d < N; ++d) {
            id[d] = static_cast<unsigned>(rem % nodes_per_axis);
            rem /= nodes_per_axis;
            w *= rule.weights[id[d]];
            x[d] = rule.nodes[id[d]] / ctx.scale(d);
        }
        c(x, cv);
        for (std::size_t d = 0; d < N; ++d) wc[d](p) = w * cv[d];
        H(p, 0) = 1.0;
        for (std::size_t col = 0; col < basis.size(); ++col) {
            double v = 1.0;
            for (const auto& e : basis[col].entries()) v *= axis[e.var][id[e.var]][e.order];
            H(p, col + 1) = v;
        }
    }

    const auto n = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < N; ++i) {
        const Eigen::MatrixXd G = H.transpose() * (wc[i].asDiagonal() * H);
        for (std::size_t col = 0; col < basis.size(); ++col) {
            const MultiIndex& m = basis[col];
            const unsigned mi = m.order(i);
            if (mi == 0) continue;
            const MultiIndex p = m.shifted(i, -1);
            const std::size_t pc = p.is_zero() ? 0 : *basis.find(p) + 1;
            const double pref = std::sqrt(2.0 * mi * rates[i] / q);
            out.col(static_cast<Eigen::Index>(col)) += pref * G.col(static_cast<Eigen::Index>(pc)).tail(n);
        }
    }
    const double tiny = 1e-14 * std::max(1.0, out.cwiseAbs().maxCoeff());
    return out.sparseView(1.0, tiny);
}

SparseMatrix quadratic_C(const BasisSet& basis, double q, const std::vector<QuadraticTerm>& terms) {
    const auto& rates = basis.rates();
    std::vector<std::vector<QuadraticTerm>> by_k(basis.dim());
    for (const auto& t : terms) {
        if (t.k >= basis.dim() || t.i >= basis.dim() || t.j >= basis.dim())
            throw ConfigError("quadratic drift term index out of range");
        if (t.k == t.i || t.k == t.j) throw ModelError("quadratic drift c_k must not depend on x_k");
        by_k[t.k].push_back(t);
    }
    return matrix_from_action(basis, [&](const MultiIndex& m) {
        FockVector out;
        for (const auto& e : m.entries()) {
            const std::size_t k = e.var;
            if (by_k[k].empty()) continue;
            const MultiIndex mk = m.shifted(k, -1);
            for (const auto& t : by_k[k]) {
                const double amp = t.coef * std::sqrt(q / (2.0 * rates[t.i])) * std::sqrt(q / (2.0 * rates[t.j])) *
                                   std::sqrt(2.0 * rates[k] / q) * std::sqrt(double(e.order));
                FockVector v{{mk, amp}};
                axpy(out, 1.0, position(position(v, t.j), t.i));
            }
        }
        return out;
    });
}

DivergenceReport verify_divergence_free(const SystemSpec& spec, std::size_t n_points, std::uint64_t seed) {
    DivergenceReport rep;
    const std::size_t N = spec.dim();
    if (spec.b.rows() != 0) {
        for (int k = 0; k < spec.b.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(spec.b, k); it; ++it) {
                const auto i = it.row(), j = it.col();
                const double r = std::abs(spec.rates[i] * it.value() + spec.rates[j] * spec.b.coeff(j, i));
                rep.nde3 = std::max(rep.nde3, r);
            }
    }
    if (spec.has_nonlinear()) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        constexpr double h = 1e-3;
        std::vector<double> x(N), c(N), xp(N), cp(N);
        for (std::size_t p = 0; p < n_points; ++p) {
            for (auto& v : x) v = gauss(rng);
            spec.nonlinear(x, c);
            double e = 0.0, escale = 0.0, cmax = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                e += spec.rates[i] * x[i] * c[i];
                escale += std::abs(spec.rates[i] * x[i] * c[i]);
                cmax = std::max(cmax, std::abs(c[i]));
            }
            rep.nde2 = std::max(rep.nde2, std::abs(e) / (1.0 + escale));
            double div = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double st[4] = {2 * h, h, -h, -2 * h};
                const double wt[4] = {-1.0, 8.0, -8.0, 1.0};
                double d = 0.0;
                for (int s = 0; s < 4; ++s) {
                    xp = x;
                    xp[i] += st[s];
                    spec.nonlinear(xp, cp);
                    d += wt[s] * cp[i];
                }
                div += d / (12.0 * h);
            }
            rep.nde1 = std::max(rep.nde1, std::abs(div) / (1.0 + cmax));
        }
        rep.points = n_points;
    }
    rep.pass = rep.nde1 < 1e-8 && rep.nde2 < 1e-8 && rep.nde3 < 1e-8;
    return rep;
}

double power_norm(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_t, Eigen::Index dim,
                  int iterations, double tol, std::uint64_t seed) {
    if (dim == 0) return 0.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = gauss(rng);
    v.normalize();
    double est = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd w = apply_t(apply(v));
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        const double next = std::sqrt(nw);
        v = w / nw;
        if (it > 0 && std::abs(next - est) <= tol * next) {
            est = next;
            break;
        }
        est = next;
    }
    return est;
}

double power_norm(const SparseMatrix& m, int iterations, double tol) {
    return power_norm([&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return m * v; },
                      [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return m.transpose() * v; }, m.cols(),
                      iterations, tol);
}

SparsityReport sparsity_audit_C(const SparseOperator& c, const BasisSet& basis, const SystemSpec& spec) {
    SparsityReport r;
    r.name = "C11";
    const double K = basis.max_order();
    r.max_column_nnz = c.max_column_nnz();
    r.nnz_bound = K * std::pow(K + 1.0, double(spec.s));
    r.nnz_ok = r.max_column_nnz <= r.nnz_bound;
    r.norm = power_norm(c.mat);
    r.norm_applicable = spec.bounded();
    r.norm_bound = spec.bounded() ? spec.gamma() * std::sqrt(basis.scheme().R)
                                  : std::numeric_limits<double>::infinity();
    r.norm_ok = !r.norm_applicable || r.norm <= r.norm_bound * (1.0 + 1e-9);
    return r;
}

SparsityReport sparsity_audit_B(const SparseOperator& b, const BasisSet& basis, const SystemSpec& spec) {
    SparsityReport r;
    r.name = "B1";
    const double K = basis.max_order();
    r.max_column_nnz = b.max_column_nnz();
    r.nnz_bound = spec.s * K * (K + 1.0);
    r.nnz_ok = r.max_column_nnz <= r.nnz_bound;
    r.norm = power_norm(b.mat);
    r.norm_bound = spec.s * spec.J1 * K * std::sqrt(spec.kappa());
    r.norm_ok = r.norm <= r.norm_bound * (1.0 + 1e-9) + 1e-12;
    return r;
}

SparsityReport sparsity_audit_A(const SparseOperator& a, const BasisSet& basis) {
    SparsityReport r;
    r.name = "A1";
    r.max_column_nnz = a.max_column_nnz();
    r.nnz_bound = 1.0;
    r.nnz_ok = r.max_column_nnz <= 1;
    double mx = 0.0;
    for (std::size_t p = 0; p < basis.size(); ++p) mx = std::max(mx, basis.weight_at(p));
    r.norm = mx;
    r.norm_bound = basis.scheme().R;
    r.norm_ok = mx <= r.norm_bound * (1.0 + 1e-12);
    return r;
}

}  // namespace kolmo
