#include "kolmo/montecarlo.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#ifdef KOLMO_HAVE_OPENMP
#include <omp.h>
#endif

#include "kolmo/error.hpp"

namespace kolmo {

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
    constexpr std::uint32_t M0 = 0xD2511F53, M1 = 0xCD9E8D57;
    constexpr std::uint32_t W0 = 0x9E3779B9, W1 = 0xBB67AE85;
    std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3], k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(M0) * c0;
        const std::uint64_t p1 = std::uint64_t(M1) * c2;
        const std::uint32_t n0 = std::uint32_t(p1 >> 32) ^ c1 ^ k0;
        const std::uint32_t n2 = std::uint32_t(p0 >> 32) ^ c3 ^ k1;
        c1 = std::uint32_t(p1);
        c3 = std::uint32_t(p0);
        c0 = n0;
        c2 = n2;
        k0 += W0;
        k1 += W1;
    }
    return {c0, c1, c2, c3};
}

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream)
    : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)}, stream_(stream) {}

void NormalStream::refill() {
    // Several independent counters per refill: the rounds are latency bound, so
    // interleaving lanes is nearly free.
    constexpr int L = kLanes;
    constexpr std::uint32_t M0 = 0xD2511F53, M1 = 0xCD9E8D57;
    constexpr std::uint32_t W0 = 0x9E3779B9, W1 = 0xBB67AE85;
    std::uint32_t c0[L], c1[L], c2[L], c3[L];
    for (int l = 0; l < L; ++l) {
        const std::uint64_t ctr = counter_ + l;
        c0[l] = std::uint32_t(ctr), c1[l] = std::uint32_t(ctr >> 32);
        c2[l] = std::uint32_t(stream_), c3[l] = std::uint32_t(stream_ >> 32);
    }
    counter_ += L;
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
        for (int l = 0; l < L; ++l) {
            const std::uint64_t p0 = std::uint64_t(M0) * c0[l];
            const std::uint64_t p1 = std::uint64_t(M1) * c2[l];
            const std::uint32_t n0 = std::uint32_t(p1 >> 32) ^ c1[l] ^ k0;
            const std::uint32_t n2 = std::uint32_t(p0 >> 32) ^ c3[l] ^ k1;
            c1[l] = std::uint32_t(p1);
            c3[l] = std::uint32_t(p0);
            c0[l] = n0;
            c2[l] = n2;
        }
        k0 += W0;
        k1 += W1;
    }
    for (int l = 0; l < L; ++l) {
        ubuf_[4 * l + 0] = (double(c0[l]) + 0.5) * 0x1p-32;
        ubuf_[4 * l + 1] = (double(c1[l]) + 0.5) * 0x1p-32;
        ubuf_[4 * l + 2] = (double(c2[l]) + 0.5) * 0x1p-32;
        ubuf_[4 * l + 3] = (double(c3[l]) + 0.5) * 0x1p-32;
    }
}

double NormalStream::uniform() {
    if (uleft_ == 0) {
        refill();
        uleft_ = int(ubuf_.size());
    }
    return ubuf_[ubuf_.size() - uleft_--];
}

double NormalStream::next() {
    // Marsaglia polar method: no trigonometry, one log per accepted pair.
    if (left_ == 0) {
        double u, v, r2;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            r2 = u * u + v * v;
        } while (r2 >= 1.0 || r2 == 0.0);
        const double f = std::sqrt(-2.0 * std::log(r2) / r2);
        buf_[0] = u * f;
        buf_[1] = v * f;
        left_ = 2;
    }
    return buf_[2 - left_--];
}

namespace {

struct BlockSums {
    std::size_t n = 0;
    std::size_t blowups = 0;
    std::vector<double> s1, s2, s3, s4;  // per grid time
};

}  // namespace

SDERun simulate(const SystemSpec& spec, std::span<const double> x0, const Observable& u0,
                std::span<const double> times, const MCOptions& opt) {
    spec.validate();
    const std::size_t n = spec.dim();
    if (x0.size() != n) throw ConfigError("initial condition has the wrong dimension");
    if (opt.samples < 100) throw ConfigError("Monte Carlo needs at least 100 samples");
    if (!(opt.dt > 0.0)) throw ConfigError("time step must be positive");
    if (opt.block == 0) throw ConfigError("reduction block must be positive");
    if (opt.dt > 0.1 / spec.rates.back()) throw ConfigError("time step exceeds 0.1 / lambda_max");

    std::vector<std::size_t> step_at(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < 0.0 || (k && times[k] < times[k - 1])) throw ConfigError("time grid must be sorted and >= 0");
        const double steps = times[k] / opt.dt;
        const auto idx = static_cast<std::size_t>(std::llround(steps));
        if (std::abs(idx - steps) > 1e-9 * std::max(1.0, steps))
            throw ConfigError("grid time " + std::to_string(times[k]) + " is not a multiple of dt");
        step_at[k] = idx;
    }
    const std::size_t total_steps = step_at.empty() ? 0 : step_at.back();
    const double sq = std::sqrt(spec.q * opt.dt);
    std::vector<double> init_sd(n);
    for (std::size_t i = 0; i < n; ++i) init_sd[i] = opt.initial_noise ? std::sqrt(spec.q / (2.0 * spec.rates[i])) : 0.0;

    const std::size_t n_blocks = (opt.samples + opt.block - 1) / opt.block;
    std::vector<BlockSums> blocks(n_blocks);

#ifdef KOLMO_HAVE_OPENMP
    const int threads = opt.threads > 0 ? opt.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
    for (std::size_t b = 0; b < n_blocks; ++b) {
        BlockSums& bs = blocks[b];
        const std::size_t T = times.size();
        bs.s1.assign(T, 0.0), bs.s2.assign(T, 0.0), bs.s3.assign(T, 0.0), bs.s4.assign(T, 0.0);
        std::vector<double> x(n), f(n), u(T);
        const std::size_t first = b * opt.block, last = std::min(opt.samples, first + opt.block);
        for (std::size_t sample = first; sample < last; ++sample) {
            NormalStream rng(opt.seed, sample);
            for (std::size_t i = 0; i < n; ++i) x[i] = x0[i] + init_sd[i] * rng.next();
            std::size_t next = 0;
            bool blown = false;
            for (std::size_t step = 0;; ++step) {
                while (next < T && step_at[next] == step) u[next++] = u0(x);
                if (step == total_steps) break;
                spec.drift(x, f);
                for (std::size_t i = 0; i < n; ++i) {
                    x[i] += f[i] * opt.dt + sq * rng.next();
                    if (!(std::abs(x[i]) <= opt.blowup_threshold)) blown = true;
                }
                if (blown) break;
            }
            if (blown) {
                ++bs.blowups;
                continue;
            }
            ++bs.n;
            for (std::size_t k = 0; k < T; ++k) {
                const double v = u[k], v2 = v * v;
                bs.s1[k] += v, bs.s2[k] += v2, bs.s3[k] += v2 * v, bs.s4[k] += v2 * v2;
            }
        }
    }

    // Fixed-order reduction so the result does not depend on the thread count.
    SDERun run;
    run.times.assign(times.begin(), times.end());
    const std::size_t T = times.size();
    std::vector<double> s1(T, 0.0), s2(T, 0.0), s3(T, 0.0), s4(T, 0.0);
    for (const auto& bs : blocks) {
        run.samples += bs.n;
        run.blowups += bs.blowups;
        for (std::size_t k = 0; k < T; ++k) s1[k] += bs.s1[k], s2[k] += bs.s2[k], s3[k] += bs.s3[k], s4[k] += bs.s4[k];
    }
    if (double(run.blowups) > opt.max_blowup_fraction * double(opt.samples))
        throw NumericalError(std::to_string(run.blowups) + " of " + std::to_string(opt.samples) +
                             " trajectories blew up; the configuration is not dissipative enough for this dt");
    const double M = double(run.samples);
    for (std::size_t k = 0; k < T; ++k) {
        const double mu = s1[k] / M;
        const double e2 = s2[k] / M, e3 = s3[k] / M, e4 = s4[k] / M;
        const double m2 = std::max(0.0, e2 - mu * mu);
        const double m4 = std::max(0.0, e4 - 4.0 * mu * e3 + 6.0 * mu * mu * e2 - 3.0 * mu * mu * mu * mu);
        const double var = m2 * M / (M - 1.0);
        run.mean.push_back(mu);
        run.se.push_back(std::sqrt(var / M));
        run.variance.push_back(var);
        run.variance_se.push_back(std::sqrt(std::max(0.0, m4 - m2 * m2) / M));
    }
    return run;
}

MCComparison compare(const SDERun& run, std::span<const double> galerkin) {
    if (galerkin.size() != run.mean.size()) throw ConfigError("Galerkin curve and MC grid differ in length");
    MCComparison c;
    for (std::size_t k = 0; k < galerkin.size(); ++k) {
        const double g = std::abs(galerkin[k] - run.mean[k]);
        const double r = run.se[k] > 0.0 ? g / run.se[k] : (g > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        c.gap.push_back(g);
        c.ratio.push_back(r);
        if (g > c.max_gap || k == 0) c.max_gap = g, c.se_at_max = run.se[k], c.t_at_max = run.times[k];
        c.max_ratio = std::max(c.max_ratio, r);
    }
    return c;
}

void write_mc_csv(std::ostream& out, const SDERun& run) {
    out << "t,mean,se,n_blowups\n";
    out.precision(17);
    for (std::size_t k = 0; k < run.times.size(); ++k)
        out << run.times[k] << ',' << run.mean[k] << ',' << run.se[k] << ',' << run.blowups << '\n';
}

}  // namespace kolmo
