#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "kolmo/error.hpp"
#include "kolmo/hermite.hpp"
#include "kolmo/operators.hpp"

using namespace kolmo;

namespace {

SparseMatrix dense_to_sparse(const Eigen::MatrixXd& m) { return m.sparseView(); }

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Hermite coefficients of a polynomial drift by projection, |v| <= deg, support = all variables.
CoefficientTable project_drift(const DriftFunction& c, const Rates& rates, double q, unsigned deg) {
    const std::size_t N = rates.size();
    HermiteContext ctx(rates, q);
    auto basis = enumerate_basis(N, RegularizationScheme::max_order(deg, rates), rates);
    std::vector<MultiIndex> idx{MultiIndex(N)};
    for (const auto& m : basis.entries()) idx.push_back(m);
    const auto rule = gauss_hermite(20);
    CoefficientTable t;
    t.n_vars = N;
    t.support.assign(N, {});
    t.terms.assign(N, {});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t v = 0; v < N; ++v) t.support[i].push_back(v);
    std::size_t pts = 1;
    for (std::size_t d = 0; d < N; ++d) pts *= 20;
    std::vector<std::vector<double>> coef(N, std::vector<double>(idx.size(), 0.0));
    std::vector<double> x(N), cv(N);
    for (std::size_t p = 0; p < pts; ++p) {
        std::size_t rem = p;
        double w = 1.0;
        for (std::size_t d = 0; d < N; ++d) {
            const auto k = rem % 20;
            rem /= 20;
            w *= rule.weights[k];
            x[d] = rule.nodes[k] / ctx.scale(d);
        }
        c(x, cv);
        for (std::size_t a = 0; a < idx.size(); ++a) {
            const double h = h_norm(idx[a], x, ctx);
            for (std::size_t i = 0; i < N; ++i) coef[i][a] += w * cv[i] * h;
        }
    }
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t a = 0; a < idx.size(); ++a)
            if (std::abs(coef[i][a]) > 1e-13) t.terms[i].push_back({idx[a], coef[i][a]});
    return t;
}

SystemSpec cubic_oscillator(double lambda, double q) {
    SystemSpec s;
    s.name = "cubic";
    s.rates = {lambda, lambda};
    s.q = q;
    s.b.resize(2, 2);
    s.nonlinear = [](std::span<const double> x, std::span<double> out) {
        const double w = 1.0 + x[0] * x[0] + x[1] * x[1];
        out[0] = x[1] * w;
        out[1] = -x[0] * w;
    };
    s.J = std::numeric_limits<double>::infinity();
    s.s = 2;
    return s;
}

// Euler-top style quadratic drift, lambda-weighted energy preserving.
std::vector<QuadraticTerm> top_terms(const Rates& r) {
    const double a = 1.0, b = -2.0;
    const double c = -(r[0] * a + r[1] * b) / r[2];
    return {{0, 1, 2, a}, {1, 2, 0, b}, {2, 0, 1, c}};
}

}  // namespace

TEST_CASE("A is the weight diagonal") {
    Rates r{0.1, 0.1};
    auto basis = enumerate_basis(2, RegularizationScheme::max_order(2, r), r);
    auto A = assemble_A(basis);
    Eigen::VectorXd d = Eigen::MatrixXd(A.mat).diagonal();
    Eigen::VectorXd expect(5);
    expect << 0.1, 0.1, 0.2, 0.2, 0.2;
    CHECK((d - expect).norm() < 1e-15);
    Rates r3{0.2, 0.5, 0.9};
    auto b3 = enumerate_basis(3, RegularizationScheme::max_order(4, r3), r3);
    auto A3 = assemble_A(b3);
    double tr = 0.0;
    for (const auto& m : b3.entries())
        for (std::size_t i = 0; i < 3; ++i) tr += m.order(i) * r3[i];
    CHECK(Eigen::MatrixXd(A3.mat).trace() == doctest::Approx(tr));
    CHECK(A3.mat.coeff(*b3.find(MultiIndex::unit(3, 2)), *b3.find(MultiIndex::unit(3, 2))) == 0.9);
}

TEST_CASE("B from a rotation drift") {
    const double w = 0.7;
    Rates r{0.3, 0.3};
    SparseMatrix b(2, 2);
    b.insert(0, 1) = w;
    b.insert(1, 0) = -w;
    auto spec = linear_system("rot", r, 0.1, b);
    auto basis = enumerate_basis(2, RegularizationScheme::max_order(3, r), r);
    auto B = assemble_B(basis, spec);
    const auto e1 = *basis.find(MultiIndex::unit(2, 0)), e2 = *basis.find(MultiIndex::unit(2, 1));
    CHECK(B.mat.coeff(e2, e1) == doctest::Approx(w));
    CHECK(B.mat.coeff(e1, e2) == doctest::Approx(-w));
    Eigen::MatrixXd Bd(B.mat);
    CHECK(max_abs(Bd + Bd.transpose()) == 0.0);
    for (std::size_t c = 0; c < basis.size(); ++c)
        for (std::size_t rr = 0; rr < basis.size(); ++rr)
            if (basis[c].total_order() != basis[rr].total_order()) CHECK(Bd(rr, c) == 0.0);

    auto zero = linear_system("zero", r, 0.1, SparseMatrix(2, 2));
    CHECK(assemble_B(basis, zero).mat.nonZeros() == 0);
}

TEST_CASE("B explicit matrix elements with unequal rates") {
    Rates r{0.2, 0.5, 0.8};
    SparseMatrix b(3, 3);
    // lambda_i b_ij = -lambda_j b_ji
    b.insert(0, 1) = 1.5;
    b.insert(1, 0) = -1.5 * r[0] / r[1];
    b.insert(1, 2) = -0.4;
    b.insert(2, 1) = 0.4 * r[1] / r[2];
    auto spec = linear_system("lin3", r, 0.3, b);
    auto basis = enumerate_basis(3, RegularizationScheme::max_order(4, r), r);
    auto B = assemble_B(basis, spec);
    Eigen::MatrixXd Bd(B.mat);
    CHECK(max_abs(Bd + Bd.transpose()) < 1e-14);
    // <m - e_i + e_j | B | m> = beta_ij sqrt(m_i (m_j + 1))
    const auto m = MultiIndex::from_dense(std::vector<int>{2, 1, 1});
    const auto t = m.shifted(0, -1).shifted(1, 1);
    const double beta01 = 1.5 * std::sqrt(r[0] / r[1]);
    CHECK(Bd(*basis.find(t), *basis.find(m)) == doctest::Approx(beta01 * std::sqrt(2.0 * 2.0)));

    SparseMatrix bad(2, 2);
    bad.insert(0, 1) = 0.3;
    bad.insert(1, 0) = 0.3;
    SystemSpec broken = linear_system("ok", {0.5, 0.5}, 0.1, SparseMatrix(2, 2));
    broken.b = bad;
    auto b2 = enumerate_basis(2, RegularizationScheme::max_order(2, broken.rates), broken.rates);
    CHECK_THROWS_AS(assemble_B(b2, broken), ModelError);
    auto rep = verify_divergence_free(broken);
    CHECK(rep.nde3 == doctest::Approx(2 * 0.3 * 0.5));
    CHECK_FALSE(rep.pass);
}

TEST_CASE("coefficient table, quadrature, and ladder routes agree") {
    SUBCASE("cubic oscillator") {
        auto spec = cubic_oscillator(0.1, 0.02);
        for (unsigned K = 1; K <= 3; ++K) {
            auto basis = enumerate_basis(2, RegularizationScheme::max_order(K, spec.rates), spec.rates);
            auto table = project_drift(spec.nonlinear, spec.rates, spec.q, 3);
            Eigen::MatrixXd ct(coefficient_table_C(basis, table, spec.q));
            Eigen::MatrixXd cq(quadrature_C(basis, spec.q, spec.nonlinear, 24));
            CHECK(max_abs(ct - cq) < 1e-8 * std::max(1.0, max_abs(cq)));
            CHECK(max_abs(ct + ct.transpose()) < 1e-8 * max_abs(ct));
            if (K >= 1) {
                const double eta = spec.q / (2 * spec.rates[0]);
                CHECK(cq(*basis.find(MultiIndex::unit(2, 1)), *basis.find(MultiIndex::unit(2, 0))) ==
                      doctest::Approx(1 + 4 * eta));
            }
        }
    }
    SUBCASE("quadratic top") {
        Rates r{0.3, 0.6, 1.0};
        const double q = 0.4;
        auto terms = top_terms(r);
        DriftFunction c = [terms](std::span<const double> x, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
            for (const auto& t : terms) out[t.k] += t.coef * x[t.i] * x[t.j];
        };
        for (unsigned K = 1; K <= 3; ++K) {
            auto basis = enumerate_basis(3, RegularizationScheme::max_order(K, r), r);
            Eigen::MatrixXd cl(quadratic_C(basis, q, terms));
            Eigen::MatrixXd cq(quadrature_C(basis, q, c, 12));
            auto table = project_drift(c, r, q, 2);
            Eigen::MatrixXd ct(coefficient_table_C(basis, table, q));
            CHECK(max_abs(cl - cq) < 1e-10);
            CHECK(max_abs(cl - ct) < 1e-10);
            CHECK(max_abs(cl + cl.transpose()) < 1e-12);
        }
    }
}

TEST_CASE("assemble_C symmetrizes and rejects inconsistent drift") {
    Rates r{0.3, 0.6, 1.0};
    SystemSpec spec;
    spec.name = "top";
    spec.rates = r;
    spec.q = 0.4;
    spec.b.resize(3, 3);
    auto terms = top_terms(r);
    spec.c_route = CGenerator([terms, q = spec.q](const BasisSet& b) { return quadratic_C(b, q, terms); });
    auto basis = enumerate_basis(3, RegularizationScheme::max_order(3, r), r);
    CAssemblyInfo info;
    auto C = assemble_C(basis, spec, &info);
    CHECK(info.raw_asymmetry < 1e-12);
    Eigen::MatrixXd Cd(C.mat);
    CHECK(max_abs(Cd + Cd.transpose()) == 0.0);

    // energy neutrality on random vectors
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd v(basis.size());
        for (auto& e : v) e = g(rng);
        CHECK(std::abs(v.dot(C.mat * v)) <= 1e-12 * v.squaredNorm() * max_abs(Cd));
    }

    auto bad_terms = terms;
    bad_terms[2].coef += 0.5;  // breaks the lambda-weighted energy identity
    spec.c_route = CGenerator([bad_terms, q = spec.q](const BasisSet& b) { return quadratic_C(b, q, bad_terms); });
    CHECK_THROWS_AS(assemble_C(basis, spec), ModelError);
}

TEST_CASE("divergence-free verification") {
    auto spec = cubic_oscillator(0.1, 0.02);
    auto rep = verify_divergence_free(spec);
    CHECK(rep.pass);
    CHECK(rep.nde1 < 1e-8);
    CHECK(rep.nde2 < 1e-12);

    SystemSpec broken = spec;
    broken.nonlinear = [](std::span<const double> x, std::span<double> out) {
        out[0] = x[0] * x[1];  // d/dx0 = x1, not divergence-free
        out[1] = 0.0;
    };
    CHECK_FALSE(verify_divergence_free(broken).pass);
}

TEST_CASE("coefficient table format") {
    std::istringstream in(R"(# two-variable rotation with a quadratic correction
vars 2
support 0 1
term 0 1:1 = 0.5
support 1 0
term 1 0:1 = -0.5
)");
    auto t = parse_coefficient_table(in);
    CHECK(t.n_vars == 2);
    CHECK(t.terms[0].size() == 1);
    CHECK(t.terms[0][0].v == MultiIndex::unit(2, 1));
    CHECK(t.sparsity() == 1);
    std::ostringstream out;
    write_coefficient_table(out, t);
    std::istringstream back(out.str());
    auto t2 = parse_coefficient_table(back);
    CHECK(t2.terms[1][0].coef == -0.5);

    std::istringstream bad("vars 2\nsupport 0 1\nterm 0 0:1 = 1.0\n");
    CHECK_THROWS_AS(parse_coefficient_table(bad), ConfigError);
    std::istringstream junk("vars 2\nfoo 0\n");
    CHECK_THROWS_AS(parse_coefficient_table(junk), ConfigError);
}

TEST_CASE("power iteration norm") {
    Eigen::MatrixXd m(3, 3);
    m << 0, 2, 0, -2, 0, 1, 0, -1, 0;
    CHECK(power_norm(dense_to_sparse(m)) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-5));
}

TEST_CASE("sparsity and norm audits on a linear system") {
    Rates r{0.2, 0.5, 0.8};
    SparseMatrix b(3, 3);
    b.insert(0, 1) = 1.5;
    b.insert(1, 0) = -1.5 * r[0] / r[1];
    auto spec = linear_system("lin3", r, 0.3, b);
    auto basis = enumerate_basis(3, RegularizationScheme::max_order(4, r), r);
    auto rb = sparsity_audit_B(assemble_B(basis, spec), basis, spec);
    CHECK(rb.nnz_ok);
    CHECK(rb.norm_ok);
    auto ra = sparsity_audit_A(assemble_A(basis), basis);
    CHECK(ra.norm_ok);
    CHECK(ra.norm == doctest::Approx(4 * 0.8));
}
