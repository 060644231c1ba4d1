#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kolmo {

using Rates = std::vector<double>;

/// Hermite order vector (m_1, ..., m_N) stored sparsely as sorted
/// (variable, order) pairs with order > 0. Variables are 0-based.
class MultiIndex {
public:
    struct Entry {
        std::uint32_t var;
        std::uint32_t order;
        bool operator==(const Entry&) const = default;
    };

    MultiIndex() = default;
    explicit MultiIndex(std::size_t dim) : dim_(dim) {}

    static MultiIndex from_dense(std::span<const int> orders);
    static MultiIndex from_entries(std::size_t dim, std::vector<Entry> entries);
    static MultiIndex unit(std::size_t dim, std::size_t var, unsigned order = 1);

    std::size_t dim() const { return dim_; }
    unsigned order(std::size_t var) const;
    unsigned total_order() const { return total_; }
    bool is_zero() const { return entries_.empty(); }
    std::span<const Entry> entries() const { return entries_; }
    std::vector<int> to_dense() const;

    /// m + delta * e^var. Throws if the result would have a negative entry.
    MultiIndex shifted(std::size_t var, int delta) const;
    /// m + k, where k is given over the same dimension.
    MultiIndex plus(const MultiIndex& other) const;

    std::string to_string() const;

    bool operator==(const MultiIndex& other) const {
        return dim_ == other.dim_ && entries_ == other.entries_;
    }

    std::size_t hash() const;

private:
    void set(std::size_t var, unsigned order);

    std::size_t dim_ = 0;
    unsigned total_ = 0;
    std::vector<Entry> entries_;
};

struct MultiIndexHash {
    std::size_t operator()(const MultiIndex& m) const { return m.hash(); }
};

/// Graded order: ascending |m|, ties broken so that the dense vector
/// compares lexicographically descending ((1,0) before (0,1)).
bool graded_less(const MultiIndex& a, const MultiIndex& b);

/// lambda_m = sum_i m_i lambda_i.
double weight(const MultiIndex& m, std::span<const double> rates);

enum class PartitionRule {
    total_order,  // |m| <= r / lambda_1, R = r * lambda_N / lambda_1
    weight,       // lambda_m <= r, R = r (only when the linear drift vanishes)
};

struct RegularizationScheme {
    double r = 0.0;
    double R = 0.0;
    PartitionRule rule = PartitionRule::total_order;

    static RegularizationScheme total_order(double r, std::span<const double> rates);
    /// total_order scheme whose cutoff is exactly |m| <= K.
    static RegularizationScheme max_order(unsigned K, std::span<const double> rates);
    static RegularizationScheme weighted(double r);

    void validate(std::span<const double> rates) const;
};

/// Ordered finite truncation of the multi-index set with an inverse lookup.
/// Immutable once built.
class BasisSet {
public:
    static constexpr std::size_t default_cap = 2'000'000;

    std::size_t size() const { return entries_.size(); }
    std::size_t dim() const { return rates_.size(); }
    const MultiIndex& operator[](std::size_t pos) const { return entries_[pos]; }
    const std::vector<MultiIndex>& entries() const { return entries_; }
    std::optional<std::size_t> find(const MultiIndex& m) const;
    bool contains(const MultiIndex& m) const { return find(m).has_value(); }

    const Rates& rates() const { return rates_; }
    const RegularizationScheme& scheme() const { return scheme_; }
    unsigned max_order() const { return max_order_; }
    double weight_at(std::size_t pos) const { return weights_[pos]; }

    /// Positions whose multi-index has total order k.
    std::pair<std::size_t, std::size_t> grade_range(unsigned k) const;

    friend BasisSet enumerate_basis(std::size_t, const RegularizationScheme&, std::span<const double>,
                                    std::size_t);

private:
    void finalize();

    Rates rates_;
    RegularizationScheme scheme_;
    unsigned max_order_ = 0;
    std::vector<MultiIndex> entries_;
    std::vector<double> weights_;
    std::unordered_map<MultiIndex, std::size_t, MultiIndexHash> lookup_;
};

/// All multi-indices admitted by the scheme, in graded order. Throws
/// ResourceError if the basis would exceed `cap` entries.
BasisSet enumerate_basis(std::size_t n_vars, const RegularizationScheme& scheme,
                         std::span<const double> rates, std::size_t cap = BasisSet::default_cap);

/// C(N + K, K) - 1, or nullopt on overflow of 64 bits.
std::optional<std::uint64_t> count_up_to_order(std::uint64_t n_vars, std::uint64_t max_order);

/// Bits per register: smallest q with 2^q >= N + 1.
unsigned register_bits(std::size_t n_vars);

/// Multiset encoding: K registers, register j holds the 1-based label of the
/// j-th largest element of the multiset (0 when empty), least significant bit
/// first. Returned as a string of '0'/'1' of length K * register_bits(N).
std::string encode_multiset(const MultiIndex& m, std::size_t n_vars, unsigned max_order);
MultiIndex decode_multiset(const std::string& bits, std::size_t n_vars, unsigned max_order);

}  // namespace kolmo
