#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kolmo/system.hpp"

namespace kolmo {

/// Philox4x32 with 10 rounds.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;
    static Counter block(Counter ctr, Key key);
};

/// Standard normals from one (seed, stream) pair; polar method over Philox output.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream);
    double next();
    /// Uniform in (0, 1) with 32-bit resolution.
    double uniform();

private:
    static constexpr int kLanes = 4;
    void refill();
    Philox4x32::Key key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<double, 4> buf_{};
    int left_ = 0;
    int uleft_ = 0;
    std::array<double, 4 * kLanes> ubuf_{};
};

/// Observable u0(x) evaluated along trajectories.
using Observable = std::function<double(std::span<const double>)>;

struct MCOptions {
    std::size_t samples = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    bool initial_noise = true;        // X(0) = x + z, z_i ~ N(0, q / (2 lambda_i))
    double blowup_threshold = 1e6;
    double max_blowup_fraction = 1e-3;
    std::size_t block = 1024;         // samples per reduction block
    int threads = 0;                  // 0: runtime default
};

struct SDERun {
    std::vector<double> times;
    std::vector<double> mean;
    std::vector<double> se;        // sample std / sqrt(M)
    std::vector<double> variance;  // sample variance of u0(X(t))
    std::vector<double> variance_se;
    std::size_t samples = 0;       // surviving
    std::size_t blowups = 0;
};

/// Euler-Maruyama ensemble for dX = (-lambda X + c(X) + b X) dt + sqrt(q) dW.
/// Grid times must be multiples of dt (to 1e-9 relative). Throws NumericalError
/// when more than max_blowup_fraction of the samples leave the threshold box.
SDERun simulate(const SystemSpec& spec, std::span<const double> x0, const Observable& u0,
                std::span<const double> times, const MCOptions& opt);

struct MCComparison {
    std::vector<double> gap;     // |v - mean|
    std::vector<double> ratio;   // gap / se (infinite when se = 0 and gap > 0)
    double max_gap = 0.0;
    double max_ratio = 0.0;
    double se_at_max = 0.0;
    double t_at_max = 0.0;
};

MCComparison compare(const SDERun& run, std::span<const double> galerkin);

/// CSV "t,mean,se,n_blowups".
void write_mc_csv(std::ostream& out, const SDERun& run);

}  // namespace kolmo
