#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "kolmo/evolution.hpp"
#include "kolmo/montecarlo.hpp"
#include "kolmo/states.hpp"
#include "output.hpp"

namespace kolmo::app {

struct Check {
    std::string name;
    bool applicable = true;
    bool pass = true;
    std::string status;  // free text, e.g. "not applicable (J = inf)"
    nlohmann::json detail = nlohmann::json::object();
};

struct AuditReport {
    std::vector<Check> checks;
    void add(Check c) { checks.push_back(std::move(c)); }
    /// True when an applicable check failed.
    bool failed() const;
    nlohmann::json to_json() const;
};

/// Relative slack on norm monotonicity per step.
inline constexpr double kMonotoneSlack = 1e-9;

/// States at each time, by the configured method.
std::vector<KEState> evolve_curve(const KEState& psi0, const KEOperators& ops, std::span<const double> times,
                                  const EvolutionConfig& evo);

/// Largest k with ||psi_{k+1}|| > (1 + slack) ||psi_k||, or -1.
long first_norm_increase(std::span<const KEState> traj, double slack = kMonotoneSlack);

struct OscillatorResult {
    std::vector<unsigned> K;
    std::vector<double> times;
    std::vector<std::vector<double>> curves;  // v_K(t), uncentered
    std::vector<std::vector<double>> norms;
    bool has_mc = false;
    SDERun mc;
    std::vector<MCComparison> comparisons;
};

OscillatorResult run_oscillator(const Config& c, AuditReport& audit);

struct ProbeRow {
    double xi1 = 0, xi2 = 0;
    double ke = 0;         // KE readout of the velocity component
    double projected = 0;  // Taylor-Green field in the retained modes
    double analytic = 0;   // closed-form Taylor-Green field
};

std::vector<ProbeRow> run_taylor_green(const Config& c, AuditReport& audit);

struct BQPRow {
    unsigned qubits = 0, gates = 0, arity = 0;
    std::size_t variables = 0;
    double u00 = 0;           // <0^n|U|0^n>
    double v = 0;             // v(t, x) from the KE
    double identity_error = 0;  // |u00 - e^{lambda t} v|
    double bound_gap = 0;     // |u00 - v|
    bool has_mc = false;
    double mc_mean = 0, mc_se = 0;
};

std::vector<BQPRow> run_bqp(const Config& c, AuditReport& audit);

struct OUResult {
    SDERun point;       // X(0) = x0
    SDERun stationary;  // X(0) = x0 + z
    std::vector<double> mean, variance_point;  // analytic
    double variance_stationary = 0;
};

OUResult run_ou(const Config& c);

/// Sparsity, norm, smoothing, divergence, monotonicity, regularization and Trotter
/// checks for one system over the configured K values.
void audit_system(const SystemSpec& spec, const AuditConfig& a, std::size_t cap, AuditReport& report,
                  const std::string& label = "");

/// `audit` command: audits every system the config describes.
AuditReport run_audit(const Config& c);

struct RunOutput {
    std::vector<Artifact> files;  // CSVs; audit.json and manifest.json are added by the caller
    AuditReport audit;
};

RunOutput run(const Config& c);

}  // namespace kolmo::app
