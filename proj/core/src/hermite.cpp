#include "kolmo/hermite.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "kolmo/error.hpp"

namespace kolmo {

HermiteContext::HermiteContext(Rates rates, double q) : rates_(std::move(rates)), q_(q) {
    if (!(q > 0.0) || !std::isfinite(q)) throw ConfigError("noise rate q must be positive");
    scales_.reserve(rates_.size());
    for (double l : rates_) {
        if (!(l > 0.0)) throw ConfigError("rates must be positive");
        scales_.push_back(std::sqrt(2.0 * l / q));
    }
}

double he(unsigned n, double x) {
    if (n == 0) return 1.0;
    double prev = 1.0, cur = x;
    for (unsigned k = 1; k < n; ++k) {
        const double next = x * cur - k * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

std::vector<double> he_normalized_all(unsigned n, double x) {
    std::vector<double> h(n + 1);
    h[0] = 1.0;
    if (n >= 1) h[1] = x;
    for (unsigned k = 1; k < n; ++k) h[k + 1] = (x * h[k] - std::sqrt(double(k)) * h[k - 1]) / std::sqrt(k + 1.0);
    return h;
}

namespace {
void check_dims(const MultiIndex& m, std::span<const double> x, const HermiteContext& ctx) {
    if (m.dim() != ctx.dim() || x.size() != ctx.dim()) throw ConfigError("dimension mismatch in Hermite evaluation");
}
}  // namespace

double h_norm(const MultiIndex& m, std::span<const double> x, const HermiteContext& ctx) {
    check_dims(m, x, ctx);
    double v = 1.0;
    for (const auto& e : m.entries()) {
        if (e.order > kMaxHermiteDegree) throw ConfigError("Hermite degree above 150 is out of range");
        v *= he_normalized_all(e.order, x[e.var] * ctx.scale(e.var)).back();
    }
    return v;
}

double umbral_shift_weight(const MultiIndex& m, std::span<const double> x, const HermiteContext& ctx) {
    check_dims(m, x, ctx);
    double v = 1.0;
    for (const auto& e : m.entries()) {
        const double z = x[e.var] * ctx.scale(e.var);
        for (unsigned k = 1; k <= e.order; ++k) v *= z / std::sqrt(double(k));
    }
    return v;
}

double dirac_term(unsigned n) {
    if (n % 2) return 0.0;
    // He_n(0)^2 / n! = ((n-1)!!)^2 / n! = (n-1)!! / n!!
    double t = 1.0;
    for (unsigned k = 2; k <= n; k += 2) t *= (k - 1.0) / k;
    return t;
}

double dirac_partial_norm(unsigned n_max) {
    double s = 0.0, t = 1.0;
    for (unsigned n = 2; n <= n_max; n += 2) {
        t *= (n - 1.0) / n;
        s += t;
    }
    return s;
}

double log_factorial(unsigned n) { return std::lgamma(n + 1.0); }

double hermite_triple(unsigned a, unsigned b, unsigned c) {
    const unsigned sum = a + b + c;
    if (sum % 2) return 0.0;
    const unsigned s = sum / 2;
    if (s < a || s < b || s < c) return 0.0;
    const double lg = 0.5 * (log_factorial(a) + log_factorial(b) + log_factorial(c)) - log_factorial(s - a) -
                      log_factorial(s - b) - log_factorial(s - c);
    return std::exp(lg);
}

GaussRule gauss_hermite(unsigned n) {
    if (n == 0) throw ConfigError("quadrature needs at least one node");
    static std::mutex mu;
    static std::map<unsigned, GaussRule> cache;
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(n); it != cache.end()) return it->second;
    }
    // Golub-Welsch on the Jacobi matrix of the monic He recurrence.
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    for (unsigned k = 1; k < n; ++k) T(k, k - 1) = T(k - 1, k) = std::sqrt(double(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (unsigned k = 0; k < n; ++k) {
        // Newton polish on h_n, then the Christoffel weight 1 / sum_j h_j(x)^2. Eigenvector
        // components lose relative accuracy in the tails; this form does not.
        double x = es.eigenvalues()(k);
        for (int it = 0; it < 3; ++it) {
            const auto h = he_normalized_all(n, x);
            const double d = std::sqrt(double(n)) * h[n - 1];
            if (d == 0.0) break;
            x -= h[n] / d;
        }
        double a = 0.0, b = 1.0, sum = 1.0, log_scale = 0.0;
        for (unsigned j = 0; j + 1 < n; ++j) {
            const double next = (x * b - std::sqrt(double(j)) * a) / std::sqrt(j + 1.0);
            a = b;
            b = next;
            sum += b * b;
            if (std::abs(b) > 1e100) {
                a *= 1e-100;
                b *= 1e-100;
                sum *= 1e-200;
                log_scale += 100.0 * std::log(10.0);
            }
        }
        rule.nodes[k] = x;
        rule.weights[k] = std::exp(-std::log(sum) - 2.0 * log_scale);
    }
    // Symmetrize to kill round-off in odd moments.
    for (unsigned k = 0; k < n / 2; ++k) {
        const unsigned j = n - 1 - k;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[k]);
        const double w = 0.5 * (rule.weights[j] + rule.weights[k]);
        rule.nodes[k] = -x;
        rule.nodes[j] = x;
        rule.weights[k] = rule.weights[j] = w;
    }
    if (n % 2) rule.nodes[n / 2] = 0.0;
    const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
    for (double& w : rule.weights) w /= total;
    std::lock_guard lock(mu);
    cache.emplace(n, rule);
    return rule;
}

}  // namespace kolmo
