#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "kolmo/error.hpp"
#include "kolmo/evolution.hpp"
#include "kolmo/states.hpp"
#include "kolmo/systems.hpp"

using namespace kolmo;

namespace {

BasisSet basis_for(const SystemSpec& s, unsigned K) {
    return enumerate_basis(s.dim(), RegularizationScheme::max_order(K, s.rates), s.rates);
}

SparseMatrix random_skew(Eigen::Index n, double density, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), p(0.0, 1.0);
    std::vector<Triplet> t;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (p(rng) < density) {
                const double v = u(rng);
                t.emplace_back(i, j, v);
                t.emplace_back(j, i, -v);
            }
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

Eigen::VectorXd x1_state(const SystemSpec& spec, const BasisSet& basis) {
    HermiteContext ctx(spec.rates, spec.q);
    return initial_state({MultiIndex::unit(spec.dim(), 0)}, basis, ctx);
}

}  // namespace

TEST_CASE("pure decay without skew parts") {
    auto spec = linear_system("ou", {0.5, 1.0, 2.0}, 0.3, {});
    auto basis = basis_for(spec, 3);
    auto ops = assemble_operators(basis, spec);
    for (std::size_t p : {std::size_t{0}, std::size_t{4}, basis.size() - 1}) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(ops.dim());
        e(p) = 1.0;
        const double expect = std::exp(-basis.weight_at(p) * 1.7);
        CHECK(evolve_reference({e, 0.0}, ops, 1.7).psi(p) == doctest::Approx(expect).epsilon(1e-9));
        CHECK(evolve_krylov({e, 0.0}, ops, 1.7).psi(p) == doctest::Approx(expect).epsilon(1e-10));
        // commuting case: any step count is exact
        CHECK(evolve_trotter({e, 0.0}, ops, 1.7, 1).psi(p) == doctest::Approx(expect).epsilon(1e-13));
        CHECK(evolve_trotter({e, 0.0}, ops, 1.7, 3).psi.norm() == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("linear clock system follows the dense exponential") {
    ClockCircuitSpec cs;
    cs.circuit = random_circuit(1, 2, 1, 5);
    auto spec = clock_system(cs);
    auto basis = basis_for(spec, 1);
    auto ops = assemble_operators(basis, spec);
    // Order-one block: psi' = (-lambda + b^T) psi, with the basis in dense-lex-descending order.
    Eigen::MatrixXd bt = Eigen::MatrixXd(spec.b).transpose();
    const auto n = static_cast<Eigen::Index>(spec.dim());
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);  // basis position -> variable
    for (Eigen::Index i = 0; i < n; ++i) P(static_cast<Eigen::Index>(*basis.find(MultiIndex::unit(n, i))), i) = 1.0;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Eigen::VectorXd v(n);
    for (auto& c : v) c = g(rng);
    for (double t : {0.3, 1.0, 2.5}) {
        Eigen::VectorXd expect = P * (std::exp(-cs.lambda * t) * (t * bt).exp() * v);
        Eigen::VectorXd psi0 = P * v;
        CHECK((evolve_reference({psi0, 0.0}, ops, t).psi - expect).norm() < 1e-8);
        CHECK((evolve_krylov({psi0, 0.0}, ops, t).psi - expect).norm() < 1e-10);
        CHECK((evolve_dense({psi0, 0.0}, ops, t).psi - expect).norm() < 1e-12);
    }
    auto big = make_operators(Eigen::VectorXd::Ones(kDenseExpLimit + 1), {}, {});
    CHECK_THROWS_AS(evolve_dense({Eigen::VectorXd::Ones(kDenseExpLimit + 1), 0.0}, big, 1.0), ResourceError);
}

TEST_CASE("Krylov exponential matches dense expm") {
    std::mt19937_64 rng(17);
    for (Eigen::Index n : {5, 60, 300}) {
        SparseMatrix s = random_skew(n, 0.05, rng);
        Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(n, 0.1, 3.0);
        SparseMatrix m = s;
        for (Eigen::Index i = 0; i < n; ++i) m.coeffRef(i, i) -= d(i);
        Eigen::VectorXd v = Eigen::VectorXd::Random(n);
        for (double t : {0.1, 2.0, 15.0}) {
            Eigen::VectorXd ref = (t * Eigen::MatrixXd(m)).exp() * v;
            CHECK((expv(t, m, v) - ref).norm() <= 1e-9 * std::max(1.0, ref.norm()));
        }
    }
    CHECK_THROWS_AS(expv(-1.0, SparseMatrix(2, 2), Eigen::VectorXd::Ones(2)), ConfigError);
}

TEST_CASE("oscillator norm is non-increasing and the energy identity holds") {
    auto spec = oscillator_system({0.1, 0.02, OmegaProfile::polynomial});
    auto basis = basis_for(spec, 6);
    auto ops = assemble_operators(basis, spec);
    KEState s0{x1_state(spec, basis), 0.0};
    std::vector<double> ts;
    for (int k = 0; k < 32; ++k) ts.push_back(25.0 * k / 31.0);
    auto traj = evolve_reference(s0, ops, ts);
    REQUIRE(traj.size() == 32);
    for (std::size_t k = 1; k < traj.size(); ++k) CHECK(traj[k].norm() <= traj[k - 1].norm() * (1 + 1e-9));
    CHECK(traj.back().norm() <= s0.norm());

    // d||psi||^2/dt = -2 psi^T A psi by central differences.
    const double h = 1e-3;
    for (double t : {0.5, 3.0, 12.0}) {
        const double tt[] = {t - h, t, t + h};
        auto tr = evolve_reference(s0, ops, tt, {1e-12, 1e-16});
        const double fd = (tr[2].psi.squaredNorm() - tr[0].psi.squaredNorm()) / (2 * h);
        const double form = -2.0 * tr[1].psi.dot(ops.a_diag.cwiseProduct(tr[1].psi));
        CHECK(fd == doctest::Approx(form).epsilon(1e-4));
    }

    auto trot = trotter_trajectory(s0, ops, 25.0, 64);
    for (std::size_t k = 1; k < trot.size(); ++k) CHECK(trot[k].norm() <= trot[k - 1].norm() * (1 + 1e-9));
}

TEST_CASE("skew parts alone conserve the norm") {
    auto spec = oscillator_system({0.1, 0.02, OmegaProfile::polynomial});
    auto basis = basis_for(spec, 5);
    auto full = assemble_operators(basis, spec);
    auto ops = make_operators(Eigen::VectorXd::Zero(full.dim()), full.B.mat, full.C.mat);
    KEState s0{x1_state(spec, basis), 0.0};
    const double ts[] = {1.0, 10.0, 25.0};
    for (const auto& s : evolve_reference(s0, ops, ts, {1e-12, 1e-16}))
        CHECK(std::abs(s.norm() - s0.norm()) < 1e-9 * s0.norm());
    CHECK(std::abs(evolve_trotter(s0, ops, 25.0, 10).norm() - s0.norm()) < 1e-12);
}

TEST_CASE("first-order Trotter convergence") {
    const unsigned steps[] = {8, 16, 32, 64, 128};
    SUBCASE("polynomial oscillator, K = 4") {
        auto spec = oscillator_system({0.1, 0.02, OmegaProfile::polynomial});
        auto basis = basis_for(spec, 4);
        auto ops = assemble_operators(basis, spec);
        auto st = trotter_convergence({x1_state(spec, basis), 0.0}, ops, 5.0, steps);
        CHECK(st.slope >= 0.8);
        CHECK(st.slope <= 1.2);
        for (std::size_t k = 1; k < st.errors.size(); ++k) CHECK(st.errors[k] < st.errors[k - 1]);
    }
    SUBCASE("bounded oscillator stays below the error bound") {
        auto spec = oscillator_system({0.1, 0.1, OmegaProfile::bounded});
        auto basis = basis_for(spec, 4);
        auto ops = assemble_operators(basis, spec);
        auto st = trotter_convergence({x1_state(spec, basis), 0.0}, ops, 5.0, steps, &basis, &spec);
        REQUIRE(st.bounds.size() == st.errors.size());
        for (std::size_t k = 0; k < st.errors.size(); ++k) CHECK(st.errors[k] <= st.bounds[k]);
        CHECK(st.slope == doctest::Approx(1.0).epsilon(0.2));
    }
}

TEST_CASE("log-log slope") {
    const double x[] = {1, 2, 4, 8};
    const double y[] = {3, 0.75, 0.1875, 0.046875};
    CHECK(loglog_slope(x, y) == doctest::Approx(-2.0));
    const double bad[] = {1, 0, 1, 1};
    CHECK_THROWS_AS(loglog_slope(x, bad), NumericalError);
}

TEST_CASE("embedding between nested bases") {
    Rates r{0.1, 0.2};
    auto small = enumerate_basis(2, RegularizationScheme::max_order(2, r), r);
    auto large = enumerate_basis(2, RegularizationScheme::max_order(4, r), r);
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(small.size()), 1, 5);
    Eigen::VectorXd big = embed(v, small, large);
    CHECK(big.norm() == doctest::Approx(v.norm()));
    CHECK((restrict_to(big, large, small) - v).norm() == 0.0);
    CHECK_THROWS_AS(embed(big, large, small), ConfigError);
}

TEST_CASE("regularization gap") {
    SUBCASE("bounded oscillator obeys the bound and improves with r") {
        auto spec = oscillator_system({0.1, 0.1, OmegaProfile::bounded});
        HermiteContext ctx(spec.rates, spec.q);
        auto init = [&](const BasisSet& b) { return initial_state({MultiIndex::unit(2, 0)}, b, ctx); };
        double prev = INFINITY;
        for (double r : {0.2, 0.4, 0.8}) {
            auto rep = regularization_gap(spec, init, 30.0, r, 1.6, 61);
            CHECK(rep.applicable);
            CHECK(rep.K_large == 16);
            CHECK(rep.K_small == unsigned(std::lround(r / 0.1)));
            CHECK(rep.bound == doctest::Approx(7.5 / r * rep.norm0_sq));
            CHECK(rep.pass);
            CHECK(rep.measured <= prev);
            prev = rep.measured;
        }
    }
    SUBCASE("no nonlinear drift means no gap") {
        auto spec = linear_system("ou", {0.1, 0.3}, 0.1, {});
        spec.J = 0.0;
        HermiteContext ctx(spec.rates, spec.q);
        auto init = [&](const BasisSet& b) { return initial_state({MultiIndex::from_dense(std::vector<int>{1, 1})}, b, ctx); };
        auto rep = regularization_gap(spec, init, 10.0, 0.2, 0.8, 11);
        CHECK(rep.measured == 0.0);
        CHECK(rep.pass);
    }
    SUBCASE("unbounded drift is refused") {
        auto spec = oscillator_system({0.1, 0.02, OmegaProfile::polynomial});
        auto rep = regularization_gap(spec, [](const BasisSet& b) { return Eigen::VectorXd::Zero(b.size()); }, 1.0,
                                      0.2, 0.4);
        CHECK_FALSE(rep.applicable);
        CHECK_FALSE(rep.pass);
    }
}

TEST_CASE("smoothing bounds") {
    SUBCASE("single mode, lambda = 1, t = 1") {
        auto spec = linear_system("one", {1.0}, 1.0, {});
        auto basis = basis_for(spec, 12);
        auto ops = assemble_operators(basis, spec);
        const double t[] = {1.0};
        auto rows = smoothing_bound_audit(ops, spec, t);
        CHECK(rows[0].a_norm == doctest::Approx(std::exp(-1.0)));
        CHECK(rows[0].a_bound == doctest::Approx(0.5));
        CHECK(rows[0].a_ok);
    }
    SUBCASE("bounded oscillator, ratios below one and decay at large t") {
        auto spec = oscillator_system({0.1, 0.1, OmegaProfile::bounded});
        auto basis = basis_for(spec, 8);
        auto ops = assemble_operators(basis, spec);
        const double ts[] = {0.1, 0.5, 1.0, 5.0, 500.0};
        auto rows = smoothing_bound_audit(ops, spec, ts);
        for (const auto& r : rows) {
            CHECK(r.a_ok);
            CHECK(r.c_applicable);
            CHECK(r.c_ok);
            CHECK(r.c_norm <= r.c_bound);
        }
        CHECK(rows.back().a_norm < 1e-15);
        CHECK(rows.back().c_norm < 1e-15);
    }
    SUBCASE("unbounded drift marks the C estimate as not applicable") {
        auto spec = oscillator_system({0.1, 0.02, OmegaProfile::polynomial});
        auto basis = basis_for(spec, 3);
        auto ops = assemble_operators(basis, spec);
        const double ts[] = {1.0};
        auto rows = smoothing_bound_audit(ops, spec, ts);
        CHECK_FALSE(rows[0].c_applicable);
        CHECK(rows[0].c_ok);
    }
}

TEST_CASE("reference integrator input checks and CSV dump") {
    auto spec = linear_system("ou", {0.5}, 1.0, {});
    auto basis = basis_for(spec, 2);
    auto ops = assemble_operators(basis, spec);
    KEState s0{Eigen::VectorXd::Ones(2), 0.0};
    const double bad[] = {1.0, 0.5};
    CHECK_THROWS_AS(evolve_reference(s0, ops, bad), ConfigError);
    CHECK_THROWS_AS(evolve_reference({Eigen::VectorXd::Ones(3), 0.0}, ops, 1.0), ConfigError);
    CHECK_THROWS_AS(evolve_trotter(s0, ops, 1.0, 0), ConfigError);
    const double ts[] = {0.0, 1.0};
    auto traj = evolve_reference(s0, ops, ts);
    std::ostringstream os;
    write_trajectory_csv(os, basis, traj);
    CHECK(os.str().rfind("t,coordinate,value\n0,0:1,1\n", 0) == 0);
}
