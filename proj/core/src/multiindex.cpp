#include "kolmo/multiindex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kolmo/error.hpp"

namespace kolmo {

MultiIndex MultiIndex::from_dense(std::span<const int> orders) {
    MultiIndex m(orders.size());
    for (std::size_t i = 0; i < orders.size(); ++i) {
        if (orders[i] < 0) throw ConfigError("multi-index entries must be non-negative");
        if (orders[i] > 0) {
            m.entries_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(orders[i])});
            m.total_ += static_cast<unsigned>(orders[i]);
        }
    }
    return m;
}

MultiIndex MultiIndex::from_entries(std::size_t dim, std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.var < b.var; });
    MultiIndex m(dim);
    for (const auto& e : entries) {
        if (e.var >= dim) throw ConfigError("multi-index variable out of range");
        if (e.order == 0) continue;
        if (!m.entries_.empty() && m.entries_.back().var == e.var) {
            m.entries_.back().order += e.order;
        } else {
            m.entries_.push_back(e);
        }
        m.total_ += e.order;
    }
    return m;
}

MultiIndex MultiIndex::unit(std::size_t dim, std::size_t var, unsigned order) {
    if (var >= dim) throw ConfigError("unit multi-index variable out of range");
    MultiIndex m(dim);
    if (order > 0) {
        m.entries_.push_back({static_cast<std::uint32_t>(var), order});
        m.total_ = order;
    }
    return m;
}

unsigned MultiIndex::order(std::size_t var) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), var,
                               [](const Entry& e, std::size_t v) { return e.var < v; });
    return (it != entries_.end() && it->var == var) ? it->order : 0u;
}

std::vector<int> MultiIndex::to_dense() const {
    std::vector<int> out(dim_, 0);
    for (const auto& e : entries_) out[e.var] = static_cast<int>(e.order);
    return out;
}

void MultiIndex::set(std::size_t var, unsigned order) {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), var,
                               [](const Entry& e, std::size_t v) { return e.var < v; });
    if (it != entries_.end() && it->var == var) {
        total_ -= it->order;
        if (order == 0) {
            entries_.erase(it);
        } else {
            it->order = order;
            total_ += order;
        }
    } else if (order > 0) {
        entries_.insert(it, {static_cast<std::uint32_t>(var), order});
        total_ += order;
    }
}

MultiIndex MultiIndex::shifted(std::size_t var, int delta) const {
    if (var >= dim_) throw ConfigError("shift variable out of range");
    const int next = static_cast<int>(order(var)) + delta;
    if (next < 0) throw ConfigError("shift produces a negative multi-index entry");
    MultiIndex out = *this;
    out.set(var, static_cast<unsigned>(next));
    return out;
}

MultiIndex MultiIndex::plus(const MultiIndex& other) const {
    if (other.dim_ != dim_) throw ConfigError("multi-index dimension mismatch");
    MultiIndex out = *this;
    for (const auto& e : other.entries_) out.set(e.var, out.order(e.var) + e.order);
    return out;
}

std::string MultiIndex::to_string() const {
    std::ostringstream os;
    os << '(';
    const auto dense = to_dense();
    for (std::size_t i = 0; i < dense.size(); ++i) {
        if (i) os << ',';
        os << dense[i];
    }
    os << ')';
    return os.str();
}

std::size_t MultiIndex::hash() const {
    std::size_t h = 0x9e3779b97f4a7c15ull ^ dim_;
    for (const auto& e : entries_) {
        std::size_t v = (static_cast<std::size_t>(e.var) << 20) ^ e.order;
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
}

bool graded_less(const MultiIndex& a, const MultiIndex& b) {
    if (a.total_order() != b.total_order()) return a.total_order() < b.total_order();
    // Dense lex-descending: the first differing variable decides, larger order first.
    auto ea = a.entries();
    auto eb = b.entries();
    std::size_t i = 0;
    while (i < ea.size() && i < eb.size()) {
        if (ea[i].var != eb[i].var) return ea[i].var < eb[i].var;
        if (ea[i].order != eb[i].order) return ea[i].order > eb[i].order;
        ++i;
    }
    return false;  // equal totals and equal common prefix imply equality
}

double weight(const MultiIndex& m, std::span<const double> rates) {
    if (rates.size() != m.dim()) throw ConfigError("rate vector does not match multi-index dimension");
    double w = 0.0;
    for (const auto& e : m.entries()) w += e.order * rates[e.var];
    return w;
}

namespace {

void check_rates(std::span<const double> rates) {
    if (rates.empty()) throw ConfigError("at least one variable is required");
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!(rates[i] > 0.0) || !std::isfinite(rates[i])) throw ConfigError("rates must be positive and finite");
        if (i > 0 && rates[i] < rates[i - 1]) throw ConfigError("rates must be sorted non-decreasing");
    }
}

constexpr double kCutoffSlack = 1e-12;

unsigned order_cutoff(const RegularizationScheme& s, std::span<const double> rates) {
    const double k = s.r / rates.front() * (1.0 + kCutoffSlack);
    if (k > 1e6) throw ResourceError("regularization cutoff r/lambda_1 is unreasonably large");
    return static_cast<unsigned>(std::floor(k));
}

}  // namespace

RegularizationScheme RegularizationScheme::total_order(double r, std::span<const double> rates) {
    check_rates(rates);
    if (!(r > 0.0)) throw ConfigError("regularization parameter r must be positive");
    return {r, r * rates.back() / rates.front(), PartitionRule::total_order};
}

RegularizationScheme RegularizationScheme::max_order(unsigned K, std::span<const double> rates) {
    check_rates(rates);
    if (K == 0) throw ConfigError("maximum order K must be at least 1");
    return total_order(K * rates.front(), rates);
}

RegularizationScheme RegularizationScheme::weighted(double r) {
    if (!(r > 0.0)) throw ConfigError("regularization parameter r must be positive");
    return {r, r, PartitionRule::weight};
}

void RegularizationScheme::validate(std::span<const double> rates) const {
    check_rates(rates);
    if (!(r > 0.0) || R < r) throw ConfigError("regularization scheme requires 0 < r <= R");
    if (rule == PartitionRule::total_order) {
        const double expect = r * rates.back() / rates.front();
        if (std::abs(R - expect) > 1e-12 * std::max(1.0, expect))
            throw ConfigError("total-order scheme requires R = r * lambda_N / lambda_1");
    } else if (R != r) {
        throw ConfigError("weight scheme requires R = r");
    }
}

std::optional<std::size_t> BasisSet::find(const MultiIndex& m) const {
    auto it = lookup_.find(m);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::pair<std::size_t, std::size_t> BasisSet::grade_range(unsigned k) const {
    auto lo = std::partition_point(entries_.begin(), entries_.end(),
                                   [k](const MultiIndex& m) { return m.total_order() < k; });
    auto hi = std::partition_point(lo, entries_.end(), [k](const MultiIndex& m) { return m.total_order() <= k; });
    return {static_cast<std::size_t>(lo - entries_.begin()), static_cast<std::size_t>(hi - entries_.begin())};
}

void BasisSet::finalize() {
    weights_.resize(entries_.size());
    lookup_.reserve(entries_.size() * 2);
    max_order_ = 0;
    for (std::size_t p = 0; p < entries_.size(); ++p) {
        weights_[p] = weight(entries_[p], rates_);
        max_order_ = std::max(max_order_, entries_[p].total_order());
        lookup_.emplace(entries_[p], p);
    }
}

std::optional<std::uint64_t> count_up_to_order(std::uint64_t n_vars, std::uint64_t max_order) {
    // C(N+k, k) = C(N+k-1, k-1) * (N+k) / k; dividing by gcd first keeps every step integral.
    std::uint64_t c = 1;
    for (std::uint64_t k = 1; k <= max_order; ++k) {
        const std::uint64_t g = std::gcd(c, k);
        const std::uint64_t f = (n_vars + k) / (k / g);
        if (__builtin_mul_overflow(c / g, f, &c)) return std::nullopt;
    }
    return c - 1;
}

namespace {

struct Enumerator {
    std::span<const double> rates;
    PartitionRule rule;
    double r;
    std::size_t cap;
    std::vector<MultiIndex>& out;
    std::vector<MultiIndex::Entry> stack;

    // Emit compositions of `rem` over variables [v, N) in dense lex-descending order.
    void recurse(std::size_t v, unsigned rem, double w) {
        const std::size_t n = rates.size();
        if (rem == 0) {
            if (out.size() >= cap)
                throw ResourceError("basis exceeds the configured cap of " + std::to_string(cap) + " entries");
            out.push_back(MultiIndex::from_entries(n, stack));
            return;
        }
        if (v == n) return;
        for (unsigned o = rem + 1; o-- > 0;) {
            const double wv = w + o * rates[v];
            if (rule == PartitionRule::weight) {
                // Remaining order must go to later variables, each at least as heavy as rates[v+1].
                const unsigned left = rem - o;
                if (left > 0 && v + 1 == n) continue;
                const double min_rest = left > 0 ? left * rates[v + 1] : 0.0;
                if (wv + min_rest > r * (1.0 + kCutoffSlack)) continue;
            } else if (v + 1 == n && o != rem) {
                continue;
            }
            if (o > 0) stack.push_back({static_cast<std::uint32_t>(v), o});
            recurse(v + 1, rem - o, wv);
            if (o > 0) stack.pop_back();
        }
    }
};

}  // namespace

BasisSet enumerate_basis(std::size_t n_vars, const RegularizationScheme& scheme, std::span<const double> rates,
                         std::size_t cap) {
    if (n_vars == 0) throw ConfigError("basis requires at least one variable");
    if (rates.size() != n_vars) throw ConfigError("rate vector length must equal the variable count");
    scheme.validate(rates);
    const unsigned K = order_cutoff(scheme, rates);

    if (scheme.rule == PartitionRule::total_order) {
        auto n = count_up_to_order(n_vars, K);
        if (!n || *n > cap)
            throw ResourceError("basis with N=" + std::to_string(n_vars) + ", K=" + std::to_string(K) +
                                " exceeds the configured cap of " + std::to_string(cap) + " entries");
    }

    BasisSet basis;
    basis.rates_.assign(rates.begin(), rates.end());
    basis.scheme_ = scheme;
    Enumerator en{rates, scheme.rule, scheme.r, cap, basis.entries_, {}};
    for (unsigned k = 1; k <= K; ++k) en.recurse(0, k, 0.0);
    basis.finalize();
    return basis;
}

unsigned register_bits(std::size_t n_vars) {
    unsigned q = 0;
    while ((std::size_t{1} << q) < n_vars + 1) ++q;
    return q;
}

std::string encode_multiset(const MultiIndex& m, std::size_t n_vars, unsigned max_order) {
    if (m.dim() != n_vars) throw ConfigError("multi-index dimension does not match N");
    if (m.total_order() > max_order) throw ConfigError("multi-index order exceeds K: cannot encode");
    const unsigned q = register_bits(n_vars);
    std::vector<std::size_t> labels;
    auto es = m.entries();
    for (auto it = es.rbegin(); it != es.rend(); ++it)
        for (unsigned c = 0; c < it->order; ++c) labels.push_back(it->var + 1);
    labels.resize(max_order, 0);
    std::string bits;
    bits.reserve(static_cast<std::size_t>(q) * max_order);
    for (std::size_t label : labels)
        for (unsigned b = 0; b < q; ++b) bits.push_back(((label >> b) & 1u) ? '1' : '0');
    return bits;
}

MultiIndex decode_multiset(const std::string& bits, std::size_t n_vars, unsigned max_order) {
    const unsigned q = register_bits(n_vars);
    if (bits.size() != static_cast<std::size_t>(q) * max_order) throw ConfigError("bit string has the wrong length");
    std::vector<MultiIndex::Entry> entries;
    std::size_t prev = SIZE_MAX;
    for (unsigned j = 0; j < max_order; ++j) {
        std::size_t label = 0;
        for (unsigned b = 0; b < q; ++b) {
            const char c = bits[j * q + b];
            if (c != '0' && c != '1') throw ConfigError("bit string must contain only 0 and 1");
            if (c == '1') label |= std::size_t{1} << b;
        }
        if (label > n_vars) throw ConfigError("register label exceeds N");
        if (label > prev) throw ConfigError("registers are not in non-increasing order");
        prev = label;
        if (label > 0) entries.push_back({static_cast<std::uint32_t>(label - 1), 1});
    }
    return MultiIndex::from_entries(n_vars, std::move(entries));
}

}  // namespace kolmo
