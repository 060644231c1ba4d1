#include "config.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "kolmo/error.hpp"

namespace kolmo::app {

Section::Section(const json& j, std::string path, json& resolved) : j_(&j), path_(std::move(path)), resolved_(&resolved) {
    if (!j.is_object()) throw ConfigError((path_.empty() ? std::string("config") : path_) + ": expected an object");
    if (!resolved_->is_object()) *resolved_ = json::object();
}

bool Section::has(const std::string& key) const { return j_->contains(key); }

template <class T>
T Section::convert(const std::string& key, const json& v) const {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
            if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                throw ConfigError(where(key) + ": must be non-negative");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
        } else {
            using E = typename T::value_type;
            if (!v.is_array()) throw ConfigError(where(key) + ": expected an array");
            T out;
            for (const auto& e : v) out.push_back(convert<E>(key, e));
            return out;
        }
        return v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where(key) + ": " + e.what());
    }
}

template <class T>
T Section::get(const std::string& key, const T& fallback) {
    used_.insert(key);
    const T v = j_->contains(key) ? convert<T>(key, j_->at(key)) : fallback;
    (*resolved_)[key] = v;
    return v;
}

template <class T>
T Section::require(const std::string& key) {
    if (!j_->contains(key)) throw ConfigError("missing required key '" + where(key) + "'");
    return get<T>(key, T{});
}

const json* Section::raw(const std::string& key) {
    used_.insert(key);
    if (!j_->contains(key)) return nullptr;
    (*resolved_)[key] = j_->at(key);
    return &j_->at(key);
}

Section Section::sub(const std::string& key) {
    used_.insert(key);
    static const json empty = json::object();
    const json& v = j_->contains(key) ? j_->at(key) : empty;
    return Section(v, where(key), (*resolved_)[key]);
}

void Section::finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
        if (!used_.count(it.key())) throw ConfigError("unknown key '" + where(it.key()) + "'");
}

template double Section::get<double>(const std::string&, const double&);
template bool Section::get<bool>(const std::string&, const bool&);
template int Section::get<int>(const std::string&, const int&);
template unsigned Section::get<unsigned>(const std::string&, const unsigned&);
template std::size_t Section::get<std::size_t>(const std::string&, const std::size_t&);
template std::string Section::get<std::string>(const std::string&, const std::string&);
template std::vector<double> Section::get<std::vector<double>>(const std::string&, const std::vector<double>&);
template std::vector<unsigned> Section::get<std::vector<unsigned>>(const std::string&, const std::vector<unsigned>&);
template std::vector<std::string> Section::get<std::vector<std::string>>(const std::string&,
                                                                          const std::vector<std::string>&);

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::oscillator: return "oscillator";
        case Experiment::nse_taylor_green: return "nse_taylor_green";
        case Experiment::bqp_circuit: return "bqp_circuit";
        case Experiment::ou_sanity: return "ou_sanity";
        case Experiment::audits: return "audits";
    }
    return "?";
}

std::vector<double> TimeGrid::values() const {
    std::vector<double> t(points);
    for (std::size_t k = 0; k < points; ++k) t[k] = points == 1 ? t_end : t_end * double(k) / double(points - 1);
    return t;
}

namespace {

Experiment parse_experiment(const std::string& s) {
    if (s == "oscillator") return Experiment::oscillator;
    if (s == "nse_taylor_green") return Experiment::nse_taylor_green;
    if (s == "bqp_circuit") return Experiment::bqp_circuit;
    if (s == "ou_sanity") return Experiment::ou_sanity;
    if (s == "audits") return Experiment::audits;
    throw ConfigError("experiment: unknown value '" + s + "'");
}

void positive(double v, const std::string& what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + " must be positive and finite");
}

// Vectors of vectors are read by hand; Section only knows flat types.
std::vector<std::vector<double>> read_matrix(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of rows");
    std::vector<std::vector<double>> rows;
    for (const auto& r : j) {
        if (!r.is_array()) throw ConfigError(where + ": expected an array of rows");
        std::vector<double> row;
        for (const auto& v : r) {
            if (!v.is_number()) throw ConfigError(where + ": expected numbers");
            row.push_back(v.get<double>());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

SystemConfig parse_system(Section s, const std::set<std::string>& kinds) {
    SystemConfig c;
    c.kind = s.require<std::string>("kind");
    if (!kinds.count(c.kind)) {
        std::string allowed;
        for (const auto& k : kinds) allowed += (allowed.empty() ? "" : ", ") + k;
        throw ConfigError("system.kind: '" + c.kind + "' is not valid here (allowed: " + allowed + ")");
    }
    if (c.kind == "oscillator") {
        c.lambda = s.get("lambda", 0.1);
        c.q = s.get("q", 0.02);
        const auto p = s.get<std::string>("profile", "polynomial");
        if (p == "polynomial")
            c.profile = OmegaProfile::polynomial;
        else if (p == "bounded")
            c.profile = OmegaProfile::bounded;
        else
            throw ConfigError("system.profile: expected 'polynomial' or 'bounded'");
        c.quadrature_nodes = s.get("quadrature_nodes", 240u);
        positive(c.lambda, "system.lambda");
    } else if (c.kind == "nse") {
        c.modes = s.get<std::size_t>("modes", 40);
        c.nu = s.get("nu", 0.1);
        c.q = s.get("q", 1e-5);
        if (c.modes == 0) throw ConfigError("system.modes must be positive");
        positive(c.nu, "system.nu");
    } else if (c.kind == "clock") {
        c.lambda = s.get("lambda", 0.1);
        c.q = s.get("q", 0.1);
        positive(c.lambda, "system.lambda");
    } else {
        c.rates = s.require<std::vector<double>>("rates");
        c.q = s.require<double>("q");
        if (const json* b = s.raw("b")) {
            c.b = read_matrix(*b, "system.b");
            if (c.b.size() != c.rates.size()) throw ConfigError("system.b must be N x N");
            for (const auto& row : c.b)
                if (row.size() != c.rates.size()) throw ConfigError("system.b must be N x N");
        }
        if (c.rates.empty()) throw ConfigError("system.rates must not be empty");
        for (double r : c.rates) positive(r, "system.rates");
    }
    positive(c.q, "system.q");
    s.finish();
    return c;
}

BasisConfig parse_basis(Section s, std::vector<unsigned> default_K) {
    BasisConfig b;
    if (s.has("K") && s.has("r")) throw ConfigError("basis: give either K or r, not both");
    if (s.has("r")) {
        b.r = s.get<std::vector<double>>("r", {});
        for (double r : b.r) positive(r, "basis.r");
    } else {
        b.K = s.get("K", default_K);
        if (b.K.empty()) throw ConfigError("basis.K must not be empty");
        for (unsigned k : b.K)
            if (k == 0) throw ConfigError("basis.K entries must be >= 1");
    }
    b.cap = s.get<std::size_t>("cap", BasisSet::default_cap);
    s.finish();
    return b;
}

EvolutionConfig parse_evolution(Section s, const std::string& default_method) {
    EvolutionConfig e;
    e.method = s.get("method", default_method);
    if (e.method != "reference" && e.method != "krylov" && e.method != "trotter" && e.method != "dense")
        throw ConfigError("evolution.method: expected reference, krylov, trotter or dense");
    e.trotter_steps = s.get("trotter_steps", 1000u);
    e.rtol = s.get("rtol", 1e-9);
    e.atol = s.get("atol", 1e-14);
    if (e.trotter_steps == 0) throw ConfigError("evolution.trotter_steps must be >= 1");
    positive(e.rtol, "evolution.rtol");
    positive(e.atol, "evolution.atol");
    s.finish();
    return e;
}

MCConfig parse_mc(Section s, std::size_t default_samples) {
    MCConfig m;
    m.enabled = s.get("enabled", true);
    m.samples = s.get("samples", default_samples);
    m.dt = s.get("dt", 1e-3);
    m.initial_noise = s.get("initial_noise", true);
    positive(m.dt, "mc.dt");
    if (m.enabled && m.samples < 100) throw ConfigError("mc.samples must be >= 100");
    s.finish();
    return m;
}

TimeGrid parse_curve_time(Section s, double t_end, std::size_t points) {
    TimeGrid g;
    g.t_end = s.get("t_end", t_end);
    g.points = s.get("points", points);
    if (!(g.t_end >= 0.0)) throw ConfigError("time.t_end must be >= 0");
    if (g.points < 2) throw ConfigError("time.points must be >= 2");
    s.finish();
    return g;
}

TimeGrid parse_single_time(Section s, double t) {
    TimeGrid g;
    g.t_end = s.get("t", t);
    g.points = 1;
    if (!(g.t_end >= 0.0)) throw ConfigError("time.t must be >= 0");
    s.finish();
    return g;
}

AuditConfig parse_audit(Section s, const std::vector<unsigned>& run_K) {
    AuditConfig a;
    a.K = s.get("K", run_K);
    a.smoothing_times = s.get("smoothing_times", a.smoothing_times);
    for (double t : a.smoothing_times) positive(t, "audit.smoothing_times");
    a.divergence_points = s.get("divergence_points", a.divergence_points);
    a.monotone_t = s.get("monotone_t", a.monotone_t);
    positive(a.monotone_t, "audit.monotone_t");
    if (s.has("regularization")) {
        Section r = s.sub("regularization");
        RegularizationConfig rc;
        rc.r = r.get("r", rc.r);
        rc.r_reference = r.get("r_reference", rc.r_reference);
        rc.t = r.get("t", rc.t);
        rc.samples = r.get("samples", rc.samples);
        for (double v : rc.r) {
            positive(v, "audit.regularization.r");
            if (v >= rc.r_reference) throw ConfigError("audit.regularization.r must be below r_reference");
        }
        positive(rc.t, "audit.regularization.t");
        if (rc.samples < 2) throw ConfigError("audit.regularization.samples must be >= 2");
        r.finish();
        a.regularization = rc;
    }
    if (s.has("trotter")) {
        Section t = s.sub("trotter");
        TrotterConfig tc;
        tc.K = t.get("K", tc.K);
        tc.t = t.get("t", tc.t);
        tc.steps = t.get("steps", tc.steps);
        positive(tc.t, "audit.trotter.t");
        if (tc.steps.size() < 2) throw ConfigError("audit.trotter.steps needs at least two entries");
        t.finish();
        a.trotter = tc;
    }
    s.finish();
    return a;
}

CircuitConfig parse_circuits(Section s, const std::filesystem::path& base) {
    CircuitConfig c;
    for (const auto& f : s.get<std::vector<std::string>>("files", {})) {
        std::filesystem::path p(f);
        if (p.is_relative()) p = base / p;
        if (!std::filesystem::is_regular_file(p)) throw ConfigError("circuits.files: cannot read '" + p.string() + "'");
        c.files.push_back(p);
    }
    c.count = s.get<std::size_t>("random", 0);
    c.max_qubits = s.get("max_qubits", c.max_qubits);
    c.max_gates = s.get("max_gates", c.max_gates);
    c.max_arity = s.get("max_arity", c.max_arity);
    c.seed = s.get<std::size_t>("seed", c.seed);
    if (c.max_qubits == 0 || c.max_gates == 0 || c.max_arity == 0)
        throw ConfigError("circuits: max_qubits, max_gates and max_arity must be >= 1");
    if (c.files.empty() && c.count == 0) throw ConfigError("circuits: give files or a random count");
    s.finish();
    return c;
}

}  // namespace

Config parse_config(const json& j, const std::filesystem::path& base_dir) {
    Config c;
    Section top(j, "", c.resolved);
    c.experiment = parse_experiment(top.require<std::string>("experiment"));
    c.seed = top.get<std::size_t>("seed", 1);
    c.threads = top.get("threads", 0);
    if (c.threads < 0) throw ConfigError("threads must be >= 0");

    switch (c.experiment) {
        case Experiment::oscillator: {
            c.system = parse_system(top.sub("system"), {"oscillator"});
            c.basis = parse_basis(top.sub("basis"), {2, 3, 4, 5, 6});
            c.evolution = parse_evolution(top.sub("evolution"), "reference");
            c.time = parse_curve_time(top.sub("time"), 25.0, 101);
            Section init = top.sub("initial");
            c.x0 = init.get<std::vector<double>>("x", {1.0, 0.0});
            const auto d = init.get<std::vector<unsigned>>("observable", {1, 0});
            init.finish();
            if (c.x0.size() != 2 || d.size() != 2) throw ConfigError("initial.x and initial.observable need 2 entries");
            std::vector<int> di(d.begin(), d.end());
            c.observable = MultiIndex::from_dense(di);
            c.mc = parse_mc(top.sub("mc"), 250000);
            break;
        }
        case Experiment::nse_taylor_green: {
            c.system = parse_system(top.sub("system"), {"nse"});
            c.basis = parse_basis(top.sub("basis"), {3});
            c.evolution = parse_evolution(top.sub("evolution"), "krylov");
            c.time = parse_single_time(top.sub("time"), 0.25);
            Section p = top.sub("probes");
            c.probes.count = p.get("count", c.probes.count);
            c.probes.xi1_min = p.get("xi1_min", c.probes.xi1_min);
            c.probes.xi1_max = p.get("xi1_max", c.probes.xi1_max);
            c.probes.xi2 = p.get("xi2", c.probes.xi2);
            c.probes.component = p.get("component", c.probes.component);
            p.finish();
            if (c.probes.count == 0) throw ConfigError("probes.count must be >= 1");
            if (c.probes.component != 0 && c.probes.component != 1) throw ConfigError("probes.component must be 0 or 1");
            break;
        }
        case Experiment::bqp_circuit: {
            c.system = parse_system(top.sub("system"), {"clock"});
            c.time = parse_single_time(top.sub("time"), 1.0);
            c.circuits = parse_circuits(top.sub("circuits"), base_dir);
            c.mc = parse_mc(top.sub("mc"), 10000);
            c.basis.K = {1};
            break;
        }
        case Experiment::ou_sanity: {
            c.system = parse_system(top.sub("system"), {"linear"});
            if (!c.system.b.empty()) throw ConfigError("ou_sanity needs b = 0");
            c.time = parse_curve_time(top.sub("time"), 10.0, 21);
            Section init = top.sub("initial");
            c.x0 = init.get<std::vector<double>>("x", std::vector<double>(c.system.rates.size(), 1.0));
            c.variable = init.get<std::size_t>("variable", 0);
            init.finish();
            if (c.x0.size() != c.system.rates.size()) throw ConfigError("initial.x has the wrong length");
            if (c.variable >= c.x0.size()) throw ConfigError("initial.variable out of range");
            c.mc = parse_mc(top.sub("mc"), 100000);
            c.basis.K = {4};
            break;
        }
        case Experiment::audits: {
            c.system = parse_system(top.sub("system"), {"oscillator", "nse", "clock", "linear"});
            c.basis = parse_basis(top.sub("basis"), {4});
            if (c.system.kind == "clock") c.circuits = parse_circuits(top.sub("circuits"), base_dir);
            break;
        }
    }
    c.audit = parse_audit(top.sub("audit"), c.basis.K.empty() ? std::vector<unsigned>{4} : c.basis.K);
    top.finish();
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(j, path.parent_path());
}

void override_seed(Config& c, std::uint64_t seed) {
    c.seed = seed;
    c.resolved["seed"] = seed;
}

void override_threads(Config& c, int threads) {
    if (threads < 0) throw ConfigError("--threads must be >= 0");
    c.threads = threads;
    c.resolved["threads"] = threads;
}

SystemSpec build_system(const SystemConfig& s) {
    if (s.kind == "oscillator") {
        OscillatorSpec o;
        o.lambda = s.lambda;
        o.q = s.q;
        o.profile = s.profile;
        o.quadrature_nodes = s.quadrature_nodes;
        return oscillator_system(o);
    }
    if (s.kind == "nse") return nse_system(make_nse(s.modes, s.nu, s.q));
    if (s.kind == "linear") {
        const auto n = static_cast<Eigen::Index>(s.rates.size());
        SparseMatrix b(n, n);
        std::vector<Triplet> t;
        for (Eigen::Index i = 0; i < Eigen::Index(s.b.size()); ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (s.b[i][j] != 0.0) t.emplace_back(i, j, s.b[i][j]);
        b.setFromTriplets(t.begin(), t.end());
        return linear_system("linear", s.rates, s.q, std::move(b));
    }
    throw ConfigError("system kind '" + s.kind + "' needs a circuit");
}

BasisSet build_basis(const SystemSpec& spec, unsigned K, std::size_t cap) {
    return enumerate_basis(spec.dim(), RegularizationScheme::max_order(K, spec.rates), spec.rates, cap);
}

std::vector<BasisSet> build_bases(const SystemSpec& spec, const BasisConfig& b) {
    std::vector<BasisSet> out;
    for (unsigned K : b.K) out.push_back(build_basis(spec, K, b.cap));
    for (double r : b.r)
        out.push_back(enumerate_basis(spec.dim(), RegularizationScheme::total_order(r, spec.rates), spec.rates, b.cap));
    return out;
}

std::vector<Circuit> build_circuits(const CircuitConfig& c) {
    std::vector<Circuit> out;
    for (const auto& f : c.files) out.push_back(read_circuit(f.string()));
    // Shape of each random circuit from its own generator so adding circuits
    // does not change the earlier ones.
    for (std::size_t i = 0; i < c.count; ++i) {
        std::mt19937_64 rng(c.seed * 1000003u + i);
        const unsigned n = 1 + unsigned(rng() % c.max_qubits);
        const unsigned m = 1 + unsigned(rng() % c.max_gates);
        const unsigned k = 1 + unsigned(rng() % std::min(n, c.max_arity));
        out.push_back(random_circuit(n, m, k, rng()));
    }
    return out;
}

}  // namespace kolmo::app
