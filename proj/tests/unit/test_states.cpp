#include <doctest.h>

#include <cmath>
#include <random>

#include "kolmo/error.hpp"
#include "kolmo/hermite.hpp"
#include "kolmo/states.hpp"

using namespace kolmo;

namespace {

BasisSet basis_K(const Rates& r, unsigned K) { return enumerate_basis(r.size(), RegularizationScheme::max_order(K, r), r); }

MultiIndex dense(std::vector<int> v) { return MultiIndex::from_dense(v); }

// E_z u(x + z), z ~ mu, by tensor Gauss-Hermite (N <= 2).
double smoothed(const MonomialObservable& u, std::span<const double> x, const HermiteContext& ctx) {
    const auto rule = gauss_hermite(40);
    const std::size_t n = x.size();
    double acc = 0.0;
    std::vector<double> p(n);
    if (n == 1) {
        for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
            p[0] = x[0] + rule.nodes[a] / ctx.scale(0);
            acc += rule.weights[a] * u(p);
        }
    } else {
        for (std::size_t a = 0; a < rule.nodes.size(); ++a)
            for (std::size_t b = 0; b < rule.nodes.size(); ++b) {
                p[0] = x[0] + rule.nodes[a] / ctx.scale(0);
                p[1] = x[1] + rule.nodes[b] / ctx.scale(1);
                acc += rule.weights[a] * rule.weights[b] * u(p);
            }
    }
    return acc;
}

}  // namespace

TEST_CASE("linear and quadratic observables") {
    Rates r{0.1, 0.4};
    const double q = 0.02;
    HermiteContext ctx(r, q);
    auto basis = basis_K(r, 3);
    for (std::size_t i = 0; i < 2; ++i) {
        auto psi = initial_state({MultiIndex::unit(2, i)}, basis, ctx);
        const auto p = *basis.find(MultiIndex::unit(2, i));
        CHECK(psi(p) == doctest::Approx(std::sqrt(q / (2 * r[i]))));
        CHECK(psi.norm() == doctest::Approx(std::sqrt(q / (2 * r[i]))));

        auto psi2 = initial_state({MultiIndex::unit(2, i, 2)}, basis, ctx);
        const auto p2 = *basis.find(MultiIndex::unit(2, i, 2));
        CHECK(psi2(p2) == doctest::Approx(q / (std::sqrt(2.0) * r[i])));
        CHECK(psi2.norm() == doctest::Approx(std::abs(psi2(p2))));
        CHECK(observable_mean(MultiIndex::unit(2, i, 2), ctx) == doctest::Approx(q / (2 * r[i])));
        const double var = q / (2 * r[i]);
        CHECK(initial_state_norm_sq(MultiIndex::unit(2, i, 2), ctx) == doctest::Approx(3 * var * var - var * var));
    }
    CHECK(observable_mean(dense({1, 2}), ctx) == 0.0);
    CHECK(observable_mean(dense({2, 4}), ctx) == doctest::Approx(0.1 * 3 * 0.025 * 0.025));
}

TEST_CASE("monomial states: norm formula and pointwise expansion") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> deg(0, 3);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + trial % 3;
        Rates r;
        for (std::size_t i = 0; i < n; ++i) r.push_back(0.1 * (i + 1));
        HermiteContext ctx(r, 0.05 + 0.01 * trial);
        std::vector<int> d(n);
        int tot = 0;
        for (auto& v : d) v = deg(rng), tot += v;
        if (tot == 0 || tot > 6) continue;
        MonomialObservable u{MultiIndex::from_dense(d)};
        auto basis = basis_K(r, 6);
        auto psi = initial_state(u, basis, ctx);
        const double closed = initial_state_norm_sq(u.d, ctx);
        CHECK(psi.squaredNorm() == doctest::Approx(closed).epsilon(1e-12));

        // u(x) = mean + sum_m psi_m H_m(x) at random points.
        const double mean = observable_mean(u.d, ctx);
        for (int k = 0; k < 5; ++k) {
            std::vector<double> x(n);
            for (auto& v : x) v = g(rng);
            double s = mean;
            for (std::size_t p = 0; p < basis.size(); ++p) s += psi(p) * h_norm(basis[p], x, ctx);
            CHECK(s == doctest::Approx(u(x)).epsilon(1e-10));
        }
    }
}

TEST_CASE("observable validation") {
    Rates r{0.1, 0.2};
    HermiteContext ctx(r, 0.1);
    CHECK_THROWS_AS(initial_state({dense({0, 0})}, basis_K(r, 3), ctx), ConfigError);
    CHECK_THROWS_AS(initial_state({dense({4, 3})}, basis_K(r, 8), ctx), ConfigError);
    CHECK_THROWS_AS(initial_state({dense({2, 1})}, basis_K(r, 2), ctx), ConfigError);
    const double w[] = {1.0};
    CHECK_THROWS_AS(initial_state_linear(w, basis_K(r, 2), ctx), ConfigError);
}

TEST_CASE("linear observable state") {
    Rates r{0.1, 0.3, 0.5};
    HermiteContext ctx(r, 0.2);
    auto basis = basis_K(r, 2);
    const double w[] = {0.5, 0.0, -2.0};
    auto psi = initial_state_linear(w, basis, ctx);
    const double x[] = {0.3, -1.1, 0.7};
    auto out = readout_state(x, basis, ctx, 4);
    CHECK(expectation({psi, 0.0}, out) == doctest::Approx(0.5 * 0.3 - 2.0 * 0.7));
}

TEST_CASE("readout state coefficients and norm") {
    Rates r{0.1, 0.1};
    const double q = 0.02;
    HermiteContext ctx(r, q);
    auto basis = basis_K(r, 4);
    const double zero[] = {0.0, 0.0};
    auto out0 = readout_state(zero, basis, ctx, 6);
    CHECK(out0.entries.empty());
    CHECK(out0.norm_sq() == 1.0);

    const double x[] = {1.0, 0.0};
    auto out = readout_state(x, basis, ctx, 6);
    const auto p = *basis.find(MultiIndex::unit(2, 0));
    REQUIRE(out.entries.size() == 4);  // orders 1..4 of variable 0
    CHECK(out.entries.front().first == p);
    CHECK(out.entries.front().second == doctest::Approx(std::sqrt(2 * 0.1 / q)));
    CHECK(readout_norm_sq(x, ctx) == doctest::Approx(std::exp(10.0)));
    const unsigned k = truncation_order(x, ctx, 1e-6);
    CHECK(truncated_readout_norm_sq(x, ctx, k) / std::exp(10.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("readout norm identity and truncation bound on random sparse points") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        Rates r{0.1, 0.2, 0.3, 0.5};
        HermiteContext ctx(r, 0.1);
        std::vector<double> x(4, 0.0);
        x[trial % 4] = u(rng);
        x[(trial + 1 + trial / 4) % 4] = u(rng);
        // keep ||x||_lambda^2 / q <= 6
        const double L = lambda_norm_sq(x, r) / ctx.q();
        if (L > 6.0)
            for (auto& v : x) v *= std::sqrt(6.0 / L);
        for (double eps : {1e-3, 1e-5, 1e-8}) {
            const unsigned k = truncation_order(x, ctx, eps);
            const double full = readout_norm_sq(x, ctx);
            const double ratio = truncated_readout_norm_sq(x, ctx, k) / full;
            CHECK(ratio <= 1.0 + 1e-14);  // rounding only
            if (eps <= 1e-5) CHECK(ratio >= 1.0 - 1e-10);
            // ||psi_out - phi_out||^2 = prod e^{y_i} - prod T_i, from per-variable tails.
            double log1m = 0.0;
            for (std::size_t i = 0; i < 4; ++i) {
                const double y = x[i] * x[i] * ctx.scale(i) * ctx.scale(i);
                double term = 1.0, tail = 0.0;
                for (unsigned m = 1; m <= k + 400; ++m) {
                    term *= y / m;
                    if (m > k) tail += term;
                }
                log1m += std::log1p(-tail / std::exp(y));
            }
            const double err_sq = -std::expm1(log1m) * full;
            CHECK(err_sq <= eps * eps);
        }
    }
}

TEST_CASE("expectation matches the smoothed observable") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::vector<std::vector<int>> ds = {{1}, {2}, {3}, {4}, {1, 1}, {2, 1}, {0, 3}, {2, 2}, {1, 3}};
    for (const auto& d : ds) {
        Rates r = d.size() == 1 ? Rates{0.3} : Rates{0.1, 0.25};
        HermiteContext ctx(r, 0.1);
        MonomialObservable obs{MultiIndex::from_dense(d)};
        auto basis = basis_K(r, 4);
        KEState psi{initial_state(obs, basis, ctx), 0.0};
        const double mean = observable_mean(obs.d, ctx);
        for (int k = 0; k < 4; ++k) {
            std::vector<double> x(r.size());
            for (auto& v : x) v = u(rng);
            auto out = readout_state(x, basis, ctx, 4);
            const double v = expectation(psi, out, mean, Centering::uncentered);
            CHECK(v == doctest::Approx(smoothed(obs, x, ctx)).epsilon(1e-8));
            CHECK(expectation(psi, out, mean) == doctest::Approx(v - mean));
        }
    }
}

TEST_CASE("expectation special cases") {
    Rates r{0.1, 0.1};
    HermiteContext ctx(r, 0.02);
    auto basis = basis_K(r, 3);
    const double x[] = {0.8, 0.0};
    auto out = readout_state(x, basis, ctx, 3);
    KEState psi{initial_state({MultiIndex::unit(2, 0)}, basis, ctx), 0.0};
    CHECK(expectation(psi, out) == doctest::Approx(0.8));
    CHECK(expectation({Eigen::VectorXd::Zero(basis.size()), 0.0}, out) == 0.0);
    CHECK_THROWS_AS(expectation({Eigen::VectorXd::Zero(3), 0.0}, out), ConfigError);
}
