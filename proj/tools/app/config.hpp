#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kolmo/multiindex.hpp"
#include "kolmo/systems.hpp"

namespace kolmo::app {

using nlohmann::json;

/// Strict view of one JSON object. Every key read is echoed, with its default
/// filled in, into `resolved`; finish() rejects keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path, json& resolved);

    bool has(const std::string& key) const;
    template <class T>
    T get(const std::string& key, const T& fallback);
    template <class T>
    T require(const std::string& key);
    Section sub(const std::string& key);
    /// Raw value (nullptr when absent); echoed verbatim.
    const json* raw(const std::string& key);
    std::string path() const { return path_; }
    void finish() const;

private:
    template <class T>
    T convert(const std::string& key, const json& v) const;
    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* j_;
    std::string path_;
    json* resolved_;
    std::set<std::string> used_;
};

enum class Experiment { oscillator, nse_taylor_green, bqp_circuit, ou_sanity, audits };

std::string to_string(Experiment e);

struct SystemConfig {
    std::string kind;  // oscillator | nse | clock | linear
    double lambda = 0.1;
    double q = 0.02;
    OmegaProfile profile = OmegaProfile::polynomial;
    unsigned quadrature_nodes = 240;
    std::size_t modes = 40;
    double nu = 0.1;
    Rates rates;
    std::vector<std::vector<double>> b;  // dense rows, linear kind only
};

struct BasisConfig {
    std::vector<unsigned> K;
    std::vector<double> r;  // total-order schemes, alternative to K
    std::size_t cap = BasisSet::default_cap;
};

struct EvolutionConfig {
    std::string method = "reference";  // reference | krylov | trotter | dense
    unsigned trotter_steps = 1000;
    double rtol = 1e-9;
    double atol = 1e-14;
};

struct MCConfig {
    bool enabled = true;
    std::size_t samples = 100000;
    double dt = 1e-3;
    bool initial_noise = true;
};

struct RegularizationConfig {
    std::vector<double> r{0.2, 0.4, 0.8};
    double r_reference = 1.6;
    double t = 30.0;
    unsigned samples = 61;
};

struct TrotterConfig {
    unsigned K = 4;
    double t = 5.0;
    std::vector<unsigned> steps{8, 16, 32, 64, 128};
};

struct AuditConfig {
    std::vector<unsigned> K;  // sparsity and norm audits; defaults to the run's K values
    std::vector<double> smoothing_times{0.1, 0.5, 1.0, 5.0};
    std::size_t divergence_points = 64;
    double monotone_t = 10.0;
    std::optional<RegularizationConfig> regularization;
    std::optional<TrotterConfig> trotter;
};

struct TimeGrid {
    double t_end = 0.0;
    std::size_t points = 2;
    std::vector<double> values() const;
};

struct ProbeConfig {
    std::size_t count = 10;
    double xi1_min = 0.05;
    double xi1_max = 0.95;
    double xi2 = 0.25;
    int component = 0;
};

struct CircuitConfig {
    std::vector<std::filesystem::path> files;
    std::size_t count = 0;  // random circuits
    unsigned max_qubits = 2;
    unsigned max_gates = 4;
    unsigned max_arity = 2;
    std::uint64_t seed = 7;
};

struct Config {
    Experiment experiment = Experiment::oscillator;
    std::uint64_t seed = 1;
    int threads = 0;
    SystemConfig system;
    BasisConfig basis;
    EvolutionConfig evolution;
    TimeGrid time;
    std::vector<double> x0;
    MultiIndex observable;  // oscillator: monomial degrees
    std::size_t variable = 0;  // ou_sanity: observed coordinate
    MCConfig mc;
    ProbeConfig probes;
    CircuitConfig circuits;
    AuditConfig audit;
    json resolved;  // full config with defaults, echoed into the manifest
};

/// Parses and validates. Throws ConfigError naming the offending key.
Config parse_config(const json& j, const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);

/// Applies --seed / --threads overrides and updates the resolved echo.
void override_seed(Config& c, std::uint64_t seed);
void override_threads(Config& c, int threads);

SystemSpec build_system(const SystemConfig& s);
BasisSet build_basis(const SystemSpec& spec, unsigned K, std::size_t cap = BasisSet::default_cap);
/// One basis per configured K, or per r when the config gives r instead.
std::vector<BasisSet> build_bases(const SystemSpec& spec, const BasisConfig& b);

/// Circuits named by the config, files first, then random ones.
std::vector<Circuit> build_circuits(const CircuitConfig& c);

}  // namespace kolmo::app
