#include "kolmo/states.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "kolmo/error.hpp"

namespace kolmo {

namespace {

double double_factorial_odd(unsigned n) {  // (n-1)!! for even n
    double v = 1.0;
    for (unsigned k = n; k > 1; k -= 2) v *= k - 1;
    return v;
}

void check_ctx(const MultiIndex& d, const HermiteContext& ctx) {
    if (d.dim() != ctx.dim()) throw ConfigError("observable and measure dimensions differ");
}

}  // namespace

void MonomialObservable::validate() const {
    if (d.total_order() < 1) throw ConfigError("monomial observable needs degree >= 1");
    if (d.total_order() > max_degree)
        throw ConfigError("monomial degree " + std::to_string(d.total_order()) + " exceeds the cap of " +
                          std::to_string(max_degree));
}

double MonomialObservable::operator()(std::span<const double> x) const {
    double v = 1.0;
    for (const auto& e : d.entries()) v *= std::pow(x[e.var], e.order);
    return v;
}

double observable_mean(const MultiIndex& d, const HermiteContext& ctx) {
    check_ctx(d, ctx);
    double v = 1.0;
    for (const auto& e : d.entries()) {
        if (e.order % 2) return 0.0;
        v *= double_factorial_odd(e.order) * std::pow(ctx.variance(e.var), e.order / 2.0);
    }
    return v;
}

std::vector<std::pair<MultiIndex, double>> monomial_expansion(const MultiIndex& d, const HermiteContext& ctx) {
    check_ctx(d, ctx);
    // y^n = sum_k n! / (sqrt(k!) j! 2^j) h_k(y), j = (n - k) / 2, with y = s x.
    std::vector<std::pair<std::vector<MultiIndex::Entry>, double>> acc{{{}, 1.0}};
    for (const auto& e : d.entries()) {
        const unsigned n = e.order;
        const double s = ctx.scale(e.var);
        std::vector<std::pair<std::vector<MultiIndex::Entry>, double>> next;
        for (unsigned k = n % 2; k <= n; k += 2) {
            const unsigned j = (n - k) / 2;
            const double c = std::exp(log_factorial(n) - 0.5 * log_factorial(k) - log_factorial(j) - j * std::log(2.0)) /
                             std::pow(s, n);
            for (const auto& [ent, v] : acc) {
                auto ent2 = ent;
                if (k) ent2.push_back({e.var, k});
                next.emplace_back(std::move(ent2), v * c);
            }
        }
        acc = std::move(next);
    }
    std::vector<std::pair<MultiIndex, double>> out;
    out.reserve(acc.size());
    for (auto& [ent, v] : acc) out.emplace_back(MultiIndex::from_entries(d.dim(), std::move(ent)), v);
    return out;
}

Eigen::VectorXd initial_state(const MonomialObservable& u0, const BasisSet& basis, const HermiteContext& ctx) {
    u0.validate();
    if (basis.dim() != ctx.dim()) throw ConfigError("basis and measure dimensions differ");
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
    for (const auto& [m, c] : monomial_expansion(u0.d, ctx)) {
        if (m.is_zero()) continue;
        auto p = basis.find(m);
        if (!p)
            throw ConfigError("observable term " + m.to_string() + " lies outside the basis (degree " +
                              std::to_string(u0.d.total_order()) + " > K?)");
        psi(static_cast<Eigen::Index>(*p)) += c;
    }
    return psi;
}

Eigen::VectorXd initial_state_linear(std::span<const double> w, const BasisSet& basis, const HermiteContext& ctx) {
    if (w.size() != ctx.dim() || basis.dim() != ctx.dim()) throw ConfigError("linear observable dimension mismatch");
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        auto p = basis.find(MultiIndex::unit(ctx.dim(), i));
        if (!p) throw ConfigError("basis lacks the first-order index of variable " + std::to_string(i));
        psi(static_cast<Eigen::Index>(*p)) = w[i] / ctx.scale(i);
    }
    return psi;
}

double initial_state_norm_sq(const MultiIndex& d, const HermiteContext& ctx) {
    check_ctx(d, ctx);
    double second = 1.0;
    for (const auto& e : d.entries()) second *= double_factorial_odd(2 * e.order) * std::pow(ctx.variance(e.var), e.order);
    const double mean = observable_mean(d, ctx);
    return second - mean * mean;
}

double lambda_norm_sq(std::span<const double> x, const Rates& rates) {
    if (x.size() != rates.size()) throw ConfigError("point and rates dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += rates[i] * x[i] * x[i];
    return s;
}

double readout_norm_sq(std::span<const double> x, const HermiteContext& ctx) {
    return std::exp(2.0 * lambda_norm_sq(x, ctx.rates()) / ctx.q());
}

double truncated_readout_norm_sq(std::span<const double> x, const HermiteContext& ctx, unsigned k) {
    if (x.size() != ctx.dim()) throw ConfigError("point and measure dimensions differ");
    double v = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double y = x[i] * x[i] * ctx.scale(i) * ctx.scale(i);
        double term = 1.0, sum = 1.0;
        for (unsigned m = 1; m <= k; ++m) {
            term *= y / m;
            sum += term;
        }
        v *= sum;
    }
    return v;
}

unsigned truncation_order(std::span<const double> x, const HermiteContext& ctx, double epsilon) {
    if (!(epsilon > 0.0)) throw ConfigError("truncation tolerance must be positive");
    if (x.size() != ctx.dim()) throw ConfigError("point and measure dimensions differ");
    std::size_t s = 0;
    double lead = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) continue;
        ++s;
        lead = std::max(lead, 8.0 * ctx.rates()[i] * x[i] * x[i] / (ctx.q() * std::log(2.0)));
    }
    if (s == 0) return 0;
    const double log_norm = lambda_norm_sq(x, ctx.rates()) / ctx.q();  // log ||psi_out||
    const double log_inv_delta = std::log(static_cast<double>(s) / epsilon) + log_norm;
    return static_cast<unsigned>(std::ceil(lead + 2.0 * std::max(0.0, log_inv_delta) / std::log(2.0)));
}

double ReadoutState::norm_sq() const {
    double s = vacuum * vacuum;
    for (const auto& [p, v] : entries) s += v * v;
    return s;
}

ReadoutState readout_state(std::span<const double> x, const BasisSet& basis, const HermiteContext& ctx, unsigned k) {
    if (x.size() != ctx.dim() || basis.dim() != ctx.dim()) throw ConfigError("readout dimension mismatch");
    ReadoutState out;
    out.k = k;
    out.basis_size = basis.size();
    std::vector<std::size_t> supp;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) supp.push_back(i);
    const unsigned cap = basis.max_order();

    std::vector<MultiIndex::Entry> ent;
    std::function<void(std::size_t, unsigned, double)> rec = [&](std::size_t pos, unsigned used, double val) {
        if (pos == supp.size()) {
            if (ent.empty()) return;
            if (auto p = basis.find(MultiIndex::from_entries(ctx.dim(), ent))) out.entries.emplace_back(*p, val);
            return;
        }
        const std::size_t i = supp[pos];
        const double z = x[i] * ctx.scale(i);
        double v = val;
        rec(pos + 1, used, v);
        for (unsigned m = 1; m <= k && used + m <= cap; ++m) {
            v *= z / std::sqrt(double(m));
            ent.push_back({static_cast<std::uint32_t>(i), m});
            rec(pos + 1, used + m, v);
            ent.pop_back();
        }
    };
    rec(0, 0, 1.0);
    std::sort(out.entries.begin(), out.entries.end());
    return out;
}

double expectation(const KEState& psi, const ReadoutState& out, double mean, Centering c) {
    if (static_cast<std::size_t>(psi.psi.size()) != out.basis_size)
        throw ConfigError("readout and state live on different bases");
    double v = 0.0;
    for (const auto& [p, w] : out.entries) v += w * psi.psi(static_cast<Eigen::Index>(p));
    if (c == Centering::uncentered) v += out.vacuum * mean;
    return v;
}

}  // namespace kolmo
