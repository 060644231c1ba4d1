#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "kolmo/error.hpp"

namespace kolmo::app {

using nlohmann::json;

bool AuditReport::failed() const {
    for (const auto& c : checks)
        if (c.applicable && !c.pass) return true;
    return false;
}

json AuditReport::to_json() const {
    json j;
    j["pass"] = !failed();
    auto& arr = j["checks"] = json::array();
    for (const auto& c : checks) {
        json e = {{"name", c.name}, {"applicable", c.applicable}, {"pass", c.pass}};
        if (!c.status.empty()) e["status"] = c.status;
        if (!c.detail.empty()) e["detail"] = c.detail;
        arr.push_back(std::move(e));
    }
    return j;
}

namespace {

std::string tag(const std::string& label, const std::string& name) { return label.empty() ? name : label + "/" + name; }

// JSON has no infinity; unbounded quantities are written as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Eigen::VectorXd unit_linear_state(const SystemSpec& spec, const BasisSet& basis, std::size_t var = 0) {
    HermiteContext ctx(spec.rates, spec.q);
    std::vector<double> w(spec.dim(), 0.0);
    w[var] = 1.0;
    return initial_state_linear(w, basis, ctx);
}

std::vector<double> linspace(double t_end, std::size_t n) {
    TimeGrid g;
    g.t_end = t_end;
    g.points = n;
    return g.values();
}

}  // namespace

std::vector<KEState> evolve_curve(const KEState& psi0, const KEOperators& ops, std::span<const double> times,
                                  const EvolutionConfig& evo) {
    if (evo.method == "reference") {
        ReferenceOptions o;
        o.rtol = evo.rtol;
        o.atol = evo.atol;
        return evolve_reference(psi0, ops, times, o);
    }
    std::vector<KEState> out;
    out.reserve(times.size());
    KEState cur = psi0;
    const double span = times.empty() ? 0.0 : times.back() - psi0.t;
    std::map<double, Eigen::MatrixXd> dense_cache;
    for (double t : times) {
        if (t < cur.t) throw ConfigError("time grid must be non-decreasing");
        const double dt = t - cur.t;
        if (dt > 0.0) {
            if (evo.method == "krylov") {
                cur = evolve_krylov(cur, ops, t);
            } else if (evo.method == "trotter") {
                const auto steps = static_cast<unsigned>(
                    std::max(1.0, std::round(double(evo.trotter_steps) * dt / std::max(span, dt))));
                cur = evolve_trotter(cur, ops, t, steps);
            } else {
                if (ops.dim() > kDenseExpLimit)
                    throw ResourceError("dense method requested for dimension " + std::to_string(ops.dim()));
                auto it = dense_cache.find(dt);
                if (it == dense_cache.end())
                    it = dense_cache.emplace(dt, (dt * Eigen::MatrixXd(ops.generator())).exp()).first;
                cur = {it->second * cur.psi, t};
            }
        }
        if (!cur.finite()) throw NumericalError("non-finite state at t = " + std::to_string(t));
        out.push_back(cur);
    }
    return out;
}

long first_norm_increase(std::span<const KEState> traj, double slack) {
    for (std::size_t k = 1; k < traj.size(); ++k)
        if (traj[k].norm() > (1.0 + slack) * traj[k - 1].norm()) return long(k);
    return -1;
}

// ---------------------------------------------------------------- audits

void audit_system(const SystemSpec& spec, const AuditConfig& a, std::size_t cap, AuditReport& report,
                  const std::string& label) {
    const auto div = verify_divergence_free(spec, a.divergence_points);
    report.add({tag(label, "divergence_free"), true, div.pass, "",
                {{"nde1", div.nde1}, {"nde2", div.nde2}, {"nde3", div.nde3}, {"points", div.points}}});

    for (unsigned K : a.K) {
        const std::string lk = tag(label, "K" + std::to_string(K));
        const BasisSet basis = build_basis(spec, K, cap);
        CAssemblyInfo info;
        const KEOperators ops = assemble_operators(basis, spec, &info);
        report.add({tag(lk, "c_assembly"), spec.has_nonlinear(), info.raw_asymmetry <= kCHardAsymmetry,
                    info.warned ? "asymmetry above warning level, symmetrized" : "",
                    {{"raw_asymmetry", info.raw_asymmetry}, {"dimension", basis.size()}}});

        const auto rc = sparsity_audit_C(ops.C, basis, spec);
        report.add({tag(lk, "C_column_nnz"), true, rc.nnz_ok, "",
                    {{"max", rc.max_column_nnz}, {"bound", rc.nnz_bound}}});
        Check rb{tag(lk, "relative_boundedness"), rc.norm_applicable, rc.norm_ok, "",
                 {{"norm", rc.norm}, {"bound", num(rc.norm_bound)}}};
        if (!spec.bounded()) rb.status = "not applicable (J = inf)";
        report.add(rb);

        const auto rbB = sparsity_audit_B(ops.B, basis, spec);
        report.add({tag(lk, "B_column_nnz"), true, rbB.nnz_ok, "",
                    {{"max", rbB.max_column_nnz}, {"bound", rbB.nnz_bound}}});
        report.add({tag(lk, "B_norm"), rbB.norm_applicable, rbB.norm_ok, "",
                    {{"norm", rbB.norm}, {"bound", num(rbB.norm_bound)}}});
        const auto ra = sparsity_audit_A(ops.A, basis);
        report.add({tag(lk, "A_norm"), true, ra.norm_ok, "", {{"norm", ra.norm}, {"bound", ra.norm_bound}}});

        const auto rows = smoothing_bound_audit(ops, spec, a.smoothing_times);
        json ja = json::array(), jc = json::array();
        bool a_ok = true, c_ok = true, c_app = false;
        for (const auto& r : rows) {
            ja.push_back({{"t", r.t}, {"norm", r.a_norm}, {"bound", r.a_bound}});
            a_ok = a_ok && r.a_ok;
            if (r.c_applicable) {
                c_app = true;
                c_ok = c_ok && r.c_ok;
                jc.push_back({{"t", r.t}, {"norm", r.c_norm}, {"bound", r.c_bound}});
            }
        }
        report.add({tag(lk, "smoothing_A"), true, a_ok, "", {{"rows", ja}}});
        Check sc{tag(lk, "smoothing_C"), c_app, c_ok, "", {{"rows", jc}}};
        if (!c_app) sc.status = spec.bounded() ? "no nonlinear part" : "not applicable (J = inf)";
        report.add(sc);

        // Norm along a reference trajectory from the normalized x_1 observable.
        Eigen::VectorXd psi0 = unit_linear_state(spec, basis);
        psi0.normalize();
        const auto times = linspace(a.monotone_t, 41);
        const auto traj = evolve_reference({psi0, 0.0}, ops, times);
        const long bad = first_norm_increase(traj);
        report.add({tag(lk, "norm_monotone"), true, bad < 0, "",
                    {{"t_end", a.monotone_t}, {"final_norm", traj.back().norm()}, {"first_violation", bad}}});
    }

    if (a.regularization) {
        const auto& rc = *a.regularization;
        if (!spec.bounded()) {
            Check c{tag(label, "regularization"), false, true, "not applicable (J = inf)", {}};
            report.add(c);
        } else {
            auto init = [&spec](const BasisSet& b) { return unit_linear_state(spec, b); };
            for (double r : rc.r) {
                const auto g = regularization_gap(spec, init, rc.t, r, rc.r_reference, rc.samples);
                report.add({tag(label, "regularization_r" + json(r).dump()), g.applicable, g.pass, g.status,
                            {{"r", r},
                             {"r_reference", g.r_large},
                             {"K", g.K_small},
                             {"K_reference", g.K_large},
                             {"measured", g.measured},
                             {"t_at_sup", g.t_at_sup},
                             {"bound", g.bound}}});
            }
        }
    }

    if (a.trotter) {
        const auto& tc = *a.trotter;
        const BasisSet basis = build_basis(spec, tc.K, cap);
        const KEOperators ops = assemble_operators(basis, spec);
        Eigen::VectorXd psi0 = unit_linear_state(spec, basis);
        const auto st = trotter_convergence({psi0, 0.0}, ops, tc.t, tc.steps, &basis, &spec);
        const bool slope_ok = st.slope >= 0.8 && st.slope <= 1.2;
        // With commuting parts the splitting is exact and the errors are round-off.
        const double emax = *std::max_element(st.errors.begin(), st.errors.end());
        const bool exact = emax <= 1e-12 * std::max(1.0, psi0.norm());
        report.add({tag(label, "trotter_slope"), !exact, slope_ok, exact ? "not applicable (splitting is exact)" : "",
                    {{"K", tc.K}, {"t", tc.t}, {"steps", st.steps}, {"errors", st.errors}, {"slope", st.slope}}});
        if (!st.bounds.empty()) {
            bool ok = true;
            for (std::size_t k = 0; k < st.errors.size(); ++k) ok = ok && st.errors[k] <= st.bounds[k];
            report.add({tag(label, "trotter_bound"), true, ok, "", {{"errors", st.errors}, {"bounds", st.bounds}}});
        } else {
            report.add({tag(label, "trotter_bound"), false, true, "not applicable (J = inf)", {}});
        }
    }
}

AuditReport run_audit(const Config& c) {
    AuditReport report;
    if (c.system.kind == "clock") {
        const auto circuits = build_circuits(c.circuits);
        for (std::size_t i = 0; i < circuits.size(); ++i)
            audit_system(clock_system({circuits[i], c.system.lambda, c.system.q}), c.audit, c.basis.cap, report,
                         "circuit" + std::to_string(i));
    } else {
        audit_system(build_system(c.system), c.audit, c.basis.cap, report);
    }
    return report;
}

// ---------------------------------------------------------------- experiments

OscillatorResult run_oscillator(const Config& c, AuditReport& audit) {
    const SystemSpec spec = build_system(c.system);
    const HermiteContext ctx(spec.rates, spec.q);
    const MonomialObservable u0{c.observable};
    u0.validate();
    const double mean = observable_mean(u0.d, ctx);

    OscillatorResult res;
    res.times = c.time.values();
    for (const BasisSet& basis : build_bases(spec, c.basis)) {
        const KEOperators ops = assemble_operators(basis, spec);
        const KEState psi0{initial_state(u0, basis, ctx), 0.0};
        const auto traj = evolve_curve(psi0, ops, res.times, c.evolution);
        const ReadoutState out = readout_state(c.x0, basis, ctx, basis.max_order());
        std::vector<double> v, n;
        for (const auto& s : traj) {
            v.push_back(expectation(s, out, mean, Centering::uncentered));
            n.push_back(s.norm());
        }
        const long bad = first_norm_increase(traj);
        audit.add({"K" + std::to_string(basis.max_order()) + "/norm_monotone", true, bad < 0, "",
                   {{"first_violation", bad}, {"final_norm", n.back()}}});
        res.K.push_back(basis.max_order());
        res.curves.push_back(std::move(v));
        res.norms.push_back(std::move(n));
    }

    if (c.mc.enabled) {
        MCOptions o;
        o.samples = c.mc.samples;
        o.dt = c.mc.dt;
        o.seed = c.seed;
        o.initial_noise = c.mc.initial_noise;
        o.threads = c.threads;
        res.mc = simulate(spec, c.x0, u0, res.times, o);
        res.has_mc = true;
        for (const auto& v : res.curves) res.comparisons.push_back(compare(res.mc, v));
        // Max gap should not grow with K beyond the 3 se noise floor.
        bool ok = true;
        json rows = json::array();
        for (std::size_t i = 0; i < res.comparisons.size(); ++i) {
            const auto& ci = res.comparisons[i];
            rows.push_back({{"K", res.K[i]}, {"max_gap", ci.max_gap}, {"t_at_max", ci.t_at_max}, {"se", ci.se_at_max}});
            if (i > 0) {
                const auto& cp = res.comparisons[i - 1];
                const double floor = 3.0 * std::max(ci.se_at_max, cp.se_at_max);
                if (res.K[i] > res.K[i - 1] && ci.max_gap > cp.max_gap + floor) ok = false;
            }
        }
        audit.add({"max_gap_non_increasing_in_K", true, ok, "", {{"rows", rows}}});
    }
    return res;
}

std::vector<ProbeRow> run_taylor_green(const Config& c, AuditReport& audit) {
    const NSESpec nse = make_nse(c.system.modes, c.system.nu, c.system.q);
    const SystemSpec spec = nse_system(nse);
    const HermiteContext ctx(spec.rates, spec.q);
    const auto bases = build_bases(spec, c.basis);
    if (bases.size() != 1) throw ConfigError("nse_taylor_green takes a single basis");
    const BasisSet& basis = bases.front();
    const KEOperators ops = assemble_operators(basis, spec);
    const auto x0 = taylor_green_projection(nse);
    const ReadoutState out = readout_state(x0, basis, ctx, basis.max_order());
    const double t = c.time.t_end;
    const double decay = std::exp(-8.0 * std::numbers::pi * std::numbers::pi * c.system.nu * t);

    std::vector<ProbeRow> rows;
    bool monotone = true;
    for (std::size_t p = 0; p < c.probes.count; ++p) {
        ProbeRow r;
        r.xi1 = c.probes.count == 1 ? c.probes.xi1_min
                                    : c.probes.xi1_min + (c.probes.xi1_max - c.probes.xi1_min) * double(p) /
                                                             double(c.probes.count - 1);
        r.xi2 = c.probes.xi2;
        const auto w = nse_probe_weights(nse, r.xi1, r.xi2, c.probes.component);
        const KEState psi0{initial_state_linear(w, basis, ctx), 0.0};
        const double times[] = {0.0, t};
        const auto traj = evolve_curve(psi0, ops, times, c.evolution);
        monotone = monotone && first_norm_increase(traj) < 0;
        r.ke = expectation(traj.back(), out);
        double proj = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) proj += w[k] * x0[k];
        r.projected = decay * proj;
        const auto uv = taylor_green(t, r.xi1, r.xi2, c.system.nu);
        r.analytic = c.probes.component == 0 ? uv.first : uv.second;
        rows.push_back(r);
    }
    audit.add({"norm_monotone", true, monotone, "", {}});
    audit.add({"relative_boundedness", false, true, "not applicable (J = inf)", {}});
    return rows;
}

std::vector<BQPRow> run_bqp(const Config& c, AuditReport& audit) {
    const auto circuits = build_circuits(c.circuits);
    const double t = c.time.t_end;
    std::vector<BQPRow> rows;
    bool identity_ok = true, bound_ok = true, sparsity_ok = true, div_ok = true;
    double worst_identity = 0.0, worst_gap = 0.0;
    for (std::size_t i = 0; i < circuits.size(); ++i) {
        const Circuit& circ = circuits[i];
        const SystemSpec spec = clock_system({circ, c.system.lambda, c.system.q});
        const HermiteContext ctx(spec.rates, spec.q);
        const BasisSet basis = build_basis(spec, 1);
        const KEOperators ops = assemble_operators(basis, spec);
        const unsigned n = circ.n_qubits, m = unsigned(circ.gates.size());
        const std::size_t in = clock_index(0, 0, n), at = clock_index(m, 0, n);

        BQPRow r;
        r.qubits = n;
        r.gates = m;
        for (const auto& g : circ.gates) r.arity = std::max<unsigned>(r.arity, unsigned(g.targets.size()));
        r.variables = spec.dim();
        r.u00 = circuit_unitary(circ)(0, 0);

        std::vector<double> w(spec.dim(), 0.0), x(spec.dim(), 0.0);
        w[in] = 1.0;
        x[at] = 1.0;
        const KEState psi = evolve_dense({initial_state_linear(w, basis, ctx), 0.0}, ops, t);
        r.v = expectation(psi, readout_state(x, basis, ctx, 1));
        r.identity_error = std::abs(r.u00 - std::exp(c.system.lambda * t) * r.v);
        r.bound_gap = std::abs(r.u00 - r.v);
        worst_identity = std::max(worst_identity, r.identity_error);
        worst_gap = std::max(worst_gap, r.bound_gap);
        identity_ok = identity_ok && r.identity_error <= 1e-9;
        bound_ok = bound_ok && r.bound_gap <= 0.1;

        const auto sb = sparsity_audit_B(ops.B, basis, spec);
        sparsity_ok = sparsity_ok && sb.nnz_ok && spec.s <= (1u << (1 + r.arity));
        div_ok = div_ok && verify_divergence_free(spec, 16).pass;

        if (c.mc.enabled) {
            MCOptions o;
            o.samples = c.mc.samples;
            o.dt = c.mc.dt;
            o.seed = c.seed + i;
            o.initial_noise = c.mc.initial_noise;
            o.threads = c.threads;
            const double ts[] = {t};
            const auto run = simulate(spec, x, [in](std::span<const double> y) { return y[in]; }, ts, o);
            r.has_mc = true;
            r.mc_mean = run.mean[0];
            r.mc_se = run.se[0];
        }
        rows.push_back(r);
    }
    const bool unit_time = std::abs(t - 1.0) < 1e-15;
    Check id{"identity", unit_time, identity_ok, unit_time ? "" : "only defined at t = 1",
             {{"tolerance", 1e-9}, {"worst", worst_identity}}};
    audit.add(id);
    audit.add({"bound_one_tenth", unit_time, bound_ok, "", {{"worst", worst_gap}}});
    audit.add({"B_column_nnz", true, sparsity_ok, "", {}});
    audit.add({"divergence_free", true, div_ok, "", {}});
    return rows;
}

OUResult run_ou(const Config& c) {
    const SystemSpec spec = build_system(c.system);
    const auto times = c.time.values();
    const std::size_t i = c.variable;
    const double lam = spec.rates[i], q = spec.q, x0 = c.x0[i];
    MCOptions o;
    o.samples = c.mc.samples;
    o.dt = c.mc.dt;
    o.seed = c.seed;
    o.threads = c.threads;
    const Observable u = [i](std::span<const double> x) { return x[i]; };
    OUResult res;
    o.initial_noise = false;
    res.point = simulate(spec, c.x0, u, times, o);
    o.initial_noise = true;
    res.stationary = simulate(spec, c.x0, u, times, o);
    for (double t : times) {
        res.mean.push_back(std::exp(-lam * t) * x0);
        res.variance_point.push_back(q * (1.0 - std::exp(-2.0 * lam * t)) / (2.0 * lam));
    }
    res.variance_stationary = q / (2.0 * lam);
    return res;
}

// ---------------------------------------------------------------- CSV assembly

namespace {

double ratio(double gap, double se) {
    if (se > 0.0) return gap / se;
    return gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

std::string mc_csv(const SDERun& run) {
    std::ostringstream os;
    write_mc_csv(os, run);
    return os.str();
}

}  // namespace

RunOutput run(const Config& c) {
    RunOutput out;
    switch (c.experiment) {
        case Experiment::oscillator: {
            const auto r = run_oscillator(c, out.audit);
            for (std::size_t k = 0; k < r.K.size(); ++k) {
                CsvWriter w("t,v,norm");
                for (std::size_t j = 0; j < r.times.size(); ++j) w.row(r.times[j], r.curves[k][j], r.norms[k][j]);
                out.files.push_back({"galerkin_curve_K" + std::to_string(r.K[k]) + ".csv", w.str()});
            }
            if (r.has_mc) {
                out.files.push_back({"mc_curve.csv", mc_csv(r.mc)});
                CsvWriter w("K,t,galerkin,mc_mean,mc_se,gap,ratio");
                for (std::size_t k = 0; k < r.K.size(); ++k)
                    for (std::size_t j = 0; j < r.times.size(); ++j)
                        w.row(r.K[k], r.times[j], r.curves[k][j], r.mc.mean[j], r.mc.se[j],
                              r.comparisons[k].gap[j], r.comparisons[k].ratio[j]);
                out.files.push_back({"comparison.csv", w.str()});
            }
            break;
        }
        case Experiment::nse_taylor_green: {
            const auto rows = run_taylor_green(c, out.audit);
            CsvWriter w("xi1,xi2,ke,projected,analytic,abs_error");
            for (const auto& r : rows) w.row(r.xi1, r.xi2, r.ke, r.projected, r.analytic, std::abs(r.ke - r.projected));
            out.files.push_back({"probes.csv", w.str()});
            break;
        }
        case Experiment::bqp_circuit: {
            const auto rows = run_bqp(c, out.audit);
            CsvWriter w("circuit,qubits,gates,arity,variables,u00,v,identity_error,bound_gap,mc_mean,mc_se");
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto& r = rows[i];
                const double nan = std::numeric_limits<double>::quiet_NaN();
                w.row(i, r.qubits, r.gates, r.arity, r.variables, r.u00, r.v, r.identity_error, r.bound_gap,
                      r.has_mc ? r.mc_mean : nan, r.has_mc ? r.mc_se : nan);
            }
            out.files.push_back({"circuits.csv", w.str()});
            break;
        }
        case Experiment::ou_sanity: {
            const auto r = run_ou(c);
            out.files.push_back({"mc_curve.csv", mc_csv(r.point)});
            out.files.push_back({"mc_curve_stationary.csv", mc_csv(r.stationary)});
            CsvWriter w(
                "start,t,mc_mean,mc_se,analytic_mean,mean_ratio,mc_variance,variance_se,analytic_variance,"
                "variance_ratio");
            for (int s = 0; s < 2; ++s) {
                const SDERun& run = s == 0 ? r.point : r.stationary;
                for (std::size_t j = 0; j < run.times.size(); ++j) {
                    const double av = s == 0 ? r.variance_point[j] : r.variance_stationary;
                    w.row(s == 0 ? "point" : "stationary", run.times[j], run.mean[j], run.se[j], r.mean[j],
                          ratio(std::abs(run.mean[j] - r.mean[j]), run.se[j]), run.variance[j], run.variance_se[j], av,
                          ratio(std::abs(run.variance[j] - av), run.variance_se[j]));
                }
            }
            out.files.push_back({"comparison.csv", w.str()});
            break;
        }
        case Experiment::audits:
            out.audit = run_audit(c);
            break;
    }
    return out;
}

}  // namespace kolmo::app
