#include "kolmo/system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "kolmo/error.hpp"
#include "kolmo/hermite.hpp"

namespace kolmo {

void CoefficientTable::validate() const {
    if (support.size() != n_vars || terms.size() != n_vars)
        throw ConfigError("coefficient table must describe one function per variable");
    for (std::size_t i = 0; i < n_vars; ++i) {
        for (std::size_t v : support[i])
            if (v >= n_vars) throw ConfigError("support variable out of range in function " + std::to_string(i));
        for (const auto& t : terms[i]) {
            if (t.v.dim() != n_vars) throw ConfigError("term dimension mismatch");
            for (const auto& e : t.v.entries())
                if (std::find(support[i].begin(), support[i].end(), e.var) == support[i].end())
                    throw ConfigError("term of function " + std::to_string(i) + " references variable " +
                                      std::to_string(e.var) + " outside its declared support");
        }
    }
}

unsigned CoefficientTable::sparsity() const {
    std::size_t s = 1;
    for (const auto& sup : support) s = std::max(s, sup.size());
    return static_cast<unsigned>(s);
}

CoefficientTable parse_coefficient_table(std::istream& in) {
    CoefficientTable t;
    bool have_vars = false;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw ConfigError("coefficient table line " + std::to_string(lineno) + ": " + msg);
    };
    auto parse_index = [&](const std::string& tok) -> std::size_t {
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(tok, &pos);
        } catch (const std::exception&) {
            fail("expected an index, got '" + tok + "'");
        }
        if (pos != tok.size()) fail("expected an index, got '" + tok + "'");
        return v;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw == "vars") {
            std::string tok;
            if (!(ls >> tok)) fail("missing variable count");
            t.n_vars = parse_index(tok);
            if (t.n_vars == 0) fail("variable count must be positive");
            t.support.assign(t.n_vars, {});
            t.terms.assign(t.n_vars, {});
            have_vars = true;
            continue;
        }
        if (!have_vars) fail("'vars' must come first");
        std::string tok;
        if (!(ls >> tok)) fail("missing function index");
        const std::size_t i = parse_index(tok);
        if (i >= t.n_vars) fail("function index out of range");
        if (kw == "support") {
            while (ls >> tok) t.support[i].push_back(parse_index(tok));
            std::sort(t.support[i].begin(), t.support[i].end());
            t.support[i].erase(std::unique(t.support[i].begin(), t.support[i].end()), t.support[i].end());
        } else if (kw == "term") {
            std::vector<MultiIndex::Entry> entries;
            bool saw_eq = false;
            double coef = 0.0;
            while (ls >> tok) {
                if (tok == "=") {
                    if (!(ls >> coef)) fail("missing coefficient after '='");
                    saw_eq = true;
                    break;
                }
                auto colon = tok.find(':');
                if (colon == std::string::npos) fail("expected var:order, got '" + tok + "'");
                const std::size_t var = parse_index(tok.substr(0, colon));
                const std::size_t ord = parse_index(tok.substr(colon + 1));
                if (var >= t.n_vars) fail("variable out of range");
                entries.push_back({static_cast<std::uint32_t>(var), static_cast<std::uint32_t>(ord)});
            }
            if (!saw_eq) fail("term without '= <coef>'");
            if (ls >> tok) fail("trailing tokens after coefficient");
            t.terms[i].push_back({MultiIndex::from_entries(t.n_vars, std::move(entries)), coef});
        } else {
            fail("unknown record '" + kw + "'");
        }
    }
    if (!have_vars) throw ConfigError("coefficient table has no 'vars' record");
    t.validate();
    return t;
}

CoefficientTable read_coefficient_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open coefficient table " + path);
    return parse_coefficient_table(f);
}

void write_coefficient_table(std::ostream& out, const CoefficientTable& table) {
    out << "vars " << table.n_vars << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < table.n_vars; ++i) {
        out << "support " << i;
        for (auto v : table.support[i]) out << ' ' << v;
        out << '\n';
        for (const auto& t : table.terms[i]) {
            out << "term " << i;
            for (const auto& e : t.v.entries()) out << ' ' << e.var << ':' << e.order;
            out << " = " << t.coef << '\n';
        }
    }
}

double SystemSpec::gamma() const {
    if (!std::isfinite(J)) return std::numeric_limits<double>::infinity();
    return J * std::sqrt(2.0 / q);
}

void SystemSpec::drift(std::span<const double> x, std::span<double> out) const {
    const std::size_t n = dim();
    if (nonlinear) {
        nonlinear(x, out);
    } else {
        std::fill(out.begin(), out.begin() + n, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) out[i] -= rates[i] * x[i];
    for (int k = 0; k < b.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(b, k); it; ++it) out[it.row()] += it.value() * x[it.col()];
}

void SystemSpec::validate() const {
    if (rates.empty()) throw ConfigError("system needs at least one variable");
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!(rates[i] > 0.0) || !std::isfinite(rates[i])) throw ConfigError("rates must be positive");
        if (i && rates[i] < rates[i - 1]) throw ConfigError("rates must be sorted non-decreasing");
    }
    if (!(q > 0.0) || !std::isfinite(q)) throw ConfigError("noise rate q must be positive");
    if (b.rows() != 0 && (b.rows() != static_cast<Eigen::Index>(dim()) || b.cols() != b.rows()))
        throw ConfigError("linear drift matrix has the wrong shape");
    if (!(J >= 0.0) || !(J1 >= 0.0)) throw ConfigError("strengths J and J1 must be non-negative");
    if (s == 0) throw ConfigError("sparsity s must be at least 1");
    if (auto* t = std::get_if<CoefficientTable>(&c_route)) {
        if (t->n_vars != dim()) throw ConfigError("coefficient table dimension mismatch");
        t->validate();
    }
}

SparseMatrix beta_matrix(const SystemSpec& spec, double tol) {
    const auto n = static_cast<Eigen::Index>(spec.dim());
    SparseMatrix beta(n, n);
    if (spec.b.rows() == 0) return beta;
    std::vector<Triplet> trip;
    double scale = 0.0;
    for (int k = 0; k < spec.b.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(spec.b, k); it; ++it) {
            const auto i = it.row(), j = it.col();
            trip.emplace_back(i, j, it.value() * std::sqrt(spec.rates[i] / spec.rates[j]));
            scale = std::max(scale, std::abs(it.value()));
        }
    beta.setFromTriplets(trip.begin(), trip.end());
    SparseMatrix sym = SparseMatrix(beta.transpose()) + beta;
    double worst = 0.0;
    for (int k = 0; k < sym.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(sym, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    if (worst > tol * std::max(1.0, scale))
        throw ModelError("linear drift violates lambda_i b_ij = -lambda_j b_ji (residual " + std::to_string(worst) +
                         ")");
    return beta;
}

SystemSpec linear_system(std::string name, Rates rates, double q, SparseMatrix b) {
    SystemSpec spec;
    spec.name = std::move(name);
    spec.rates = std::move(rates);
    spec.q = q;
    spec.b = std::move(b);
    if (spec.b.rows() == 0) spec.b.resize(spec.dim(), spec.dim());
    double j1 = 0.0;
    unsigned s = 1;
    std::vector<unsigned> row_nnz(spec.dim(), 0);
    for (int k = 0; k < spec.b.outerSize(); ++k) {
        unsigned col_nnz = 0;
        for (SparseMatrix::InnerIterator it(spec.b, k); it; ++it) {
            if (it.value() == 0.0) continue;
            j1 = std::max(j1, std::abs(it.value()));
            ++col_nnz;
            ++row_nnz[it.row()];
        }
        s = std::max(s, col_nnz);
    }
    for (unsigned r : row_nnz) s = std::max(s, r);
    spec.J1 = j1;
    spec.s = s;
    spec.J = 0.0;
    spec.divergence_free_by_construction = true;
    spec.validate();
    return spec;
}

DriftFunction drift_from_table(const CoefficientTable& table, Rates rates, double q) {
    table.validate();
    HermiteContext ctx(std::move(rates), q);
    return [table, ctx](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < table.n_vars; ++i) {
            double acc = 0.0;
            for (const auto& t : table.terms[i]) acc += t.coef * h_norm(t.v, x, ctx);
            out[i] = acc;
        }
    };
}

}  // namespace kolmo
