#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kolmo/error.hpp"
#include "kolmo/evolution.hpp"
#include "kolmo/montecarlo.hpp"

using namespace kolmo;

namespace {

Observable coord(std::size_t i) {
    return [i](std::span<const double> x) { return x[i]; };
}

std::vector<double> grid(double t_end, int n) {
    std::vector<double> t;
    for (int k = 0; k <= n; ++k) t.push_back(t_end * k / n);
    return t;
}

}  // namespace

TEST_CASE("Philox4x32-10 known answers") {
    using P = Philox4x32;
    CHECK(P::block({0, 0, 0, 0}, {0, 0}) == P::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(P::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          P::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(P::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          P::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("stream uniforms are the Philox blocks of (counter, stream) under the seed key") {
    for (std::uint64_t seed : {1ull, 77ull, 0x123456789abcull})
        for (std::uint64_t stream : {0ull, 5ull, 0x1'0000'0003ull}) {
            NormalStream s(seed, stream);
            for (std::uint32_t ctr = 0; ctr < 12; ++ctr) {
                const auto b = Philox4x32::block({ctr, 0, std::uint32_t(stream), std::uint32_t(stream >> 32)},
                                                 {std::uint32_t(seed), std::uint32_t(seed >> 32)});
                for (int w = 0; w < 4; ++w) CHECK(s.uniform() == (double(b[w]) + 0.5) * 0x1p-32);
            }
        }
}

TEST_CASE("normal stream moments and determinism") {
    NormalStream a(42, 7), b(42, 7), c(42, 8);
    double s = 0, s2 = 0, s4 = 0;
    const int n = 200000;
    bool differs = false;
    for (int i = 0; i < n; ++i) {
        const double v = a.next();
        CHECK_EQ(v, b.next());
        if (v != c.next()) differs = true;
        s += v, s2 += v * v, s4 += v * v * v * v;
    }
    CHECK(differs);
    CHECK(std::abs(s / n) < 5.0 / std::sqrt(n));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
    NormalStream u(1, 0);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("OU mean and variance") {
    // Oracles are the exact moments of the Euler-Maruyama chain,
    // m_{n+1} = a m_n and v_{n+1} = a^2 v_n + q dt with a = 1 - lambda dt,
    // which sit within O(dt) of the continuous ones. 36 checks on one correlated
    // ensemble: a 4 se band keeps the family-wise false alarm rate near 2e-3.
    const double z = 4.0;
    const double lam = 0.5, q = 0.2, x0v = 1.5, dt = 1e-2;
    const double a = 1.0 - lam * dt;
    auto spec = linear_system("ou", {lam}, q, {});
    const double x0[] = {x0v};
    auto ts = grid(4.0, 8);
    auto em_mean = [&](double t) { return std::pow(a, std::round(t / dt)) * x0v; };
    auto em_var = [&](double t, double v0) {
        const double n = std::round(t / dt);
        const double vinf = q * dt / (1.0 - a * a);
        return vinf + std::pow(a * a, n) * (v0 - vinf);
    };
    for (double t : ts) {
        CHECK(std::abs(em_mean(t) - std::exp(-lam * t) * x0v) < 2e-3);
        CHECK(std::abs(em_var(t, 0.0) - q * (1 - std::exp(-2 * lam * t)) / (2 * lam)) < 2e-3);
    }
    MCOptions o;
    o.samples = 100000;
    o.dt = dt;
    SUBCASE("deterministic start") {
        o.initial_noise = false;
        auto run = simulate(spec, x0, coord(0), ts, o);
        CHECK(run.blowups == 0);
        CHECK(run.samples == o.samples);
        for (std::size_t k = 0; k < ts.size(); ++k) {
            CHECK(std::abs(run.mean[k] - em_mean(ts[k])) <= z * run.se[k] + 1e-12);
            CHECK(std::abs(run.variance[k] - em_var(ts[k], 0.0)) <= z * run.variance_se[k] + 1e-12);
        }
    }
    SUBCASE("stationary start") {
        auto run = simulate(spec, x0, coord(0), ts, o);
        for (std::size_t k = 0; k < ts.size(); ++k) {
            CHECK(std::abs(run.mean[k] - em_mean(ts[k])) <= z * run.se[k]);
            CHECK(std::abs(run.variance[k] - em_var(ts[k], q / (2 * lam))) <= z * run.variance_se[k]);
        }
    }
}

TEST_CASE("standard error scaling") {
    auto spec = linear_system("ou", {1.0}, 1.0, {});
    const double x0[] = {0.0};
    const double ts[] = {1.0};
    MCOptions o;
    o.dt = 0.01;
    o.samples = 10000;
    const double se1 = simulate(spec, x0, coord(0), ts, o).se[0];
    o.samples = 40000;
    o.seed = 2;
    const double se4 = simulate(spec, x0, coord(0), ts, o).se[0];
    CHECK(se1 / se4 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("weak order one in dt") {
    const double lam = 1.0;
    auto spec = linear_system("ou", {lam}, 1e-8, {});
    const double x0[] = {1.0};
    const double ts[] = {1.0};
    std::vector<double> dts, errs;
    for (double dt : {0.1, 0.05, 0.025, 0.0125}) {
        MCOptions o;
        o.samples = 2000;
        o.dt = dt;
        o.initial_noise = false;
        auto run = simulate(spec, x0, coord(0), ts, o);
        dts.push_back(dt);
        errs.push_back(std::abs(run.mean[0] - std::exp(-lam)));
    }
    const double slope = loglog_slope(dts, errs);
    CHECK(slope >= 0.8);
    CHECK(slope <= 1.2);
}

TEST_CASE("seeded determinism across thread counts") {
    auto spec = linear_system("ou", {0.3, 0.6}, 0.1, {});
    const double x0[] = {1.0, -1.0};
    auto ts = grid(1.0, 4);
    MCOptions o;
    o.samples = 3000;
    o.dt = 0.01;
    o.block = 256;
    o.threads = 1;
    auto a = simulate(spec, x0, coord(1), ts, o);
    o.threads = 3;
    auto b = simulate(spec, x0, coord(1), ts, o);
    CHECK(a.mean == b.mean);
    CHECK(a.se == b.se);
    o.seed = 99;
    auto c = simulate(spec, x0, coord(1), ts, o);
    CHECK(a.mean != c.mean);
}

TEST_CASE("blow-up guard") {
    auto spec = linear_system("cubic", {0.1}, 0.01, {});
    spec.nonlinear = [](std::span<const double> x, std::span<double> out) { out[0] = x[0] * x[0] * x[0]; };
    const double x0[] = {2.0};
    const double ts[] = {0.0, 1.0};
    MCOptions o;
    o.samples = 200;
    o.dt = 0.01;
    CHECK_THROWS_AS(simulate(spec, x0, coord(0), ts, o), NumericalError);
}

TEST_CASE("input validation") {
    auto spec = linear_system("ou", {1.0}, 1.0, {});
    const double x0[] = {0.0};
    MCOptions o;
    o.dt = 0.01;
    const double odd[] = {0.015};
    CHECK_THROWS_AS(simulate(spec, x0, coord(0), odd, o), ConfigError);
    o.samples = 50;
    const double ok[] = {0.02};
    CHECK_THROWS_AS(simulate(spec, x0, coord(0), ok, o), ConfigError);
    o.samples = 100;
    o.dt = 0.5;
    CHECK_THROWS_AS(simulate(spec, x0, coord(0), ok, o), ConfigError);
}

TEST_CASE("comparison and CSV") {
    SDERun run;
    run.times = {0.0, 1.0};
    run.mean = {1.0, 0.5};
    run.se = {0.0, 0.1};
    run.variance = run.variance_se = {0.0, 0.0};
    const double same[] = {1.0, 0.5};
    auto c0 = compare(run, same);
    CHECK(c0.max_gap == 0.0);
    CHECK(c0.max_ratio == 0.0);
    const double off[] = {1.0, 0.8};
    auto c1 = compare(run, off);
    CHECK(c1.max_gap == doctest::Approx(0.3));
    CHECK(c1.ratio[1] == doctest::Approx(3.0));
    CHECK(c1.t_at_max == 1.0);
    const double shortv[] = {1.0};
    CHECK_THROWS_AS(compare(run, shortv), ConfigError);
    std::ostringstream os;
    write_mc_csv(os, run);
    CHECK(os.str() == "t,mean,se,n_blowups\n0,1,0,0\n1,0.5,0.10000000000000001,0\n");
}
