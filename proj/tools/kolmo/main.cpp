// kolmo: runs one experiment per config file.
//
//   kolmo run <config.json> --out <dir> [--seed N] [--threads N]
//   kolmo audit <config.json> [--out <dir>] [--seed N] [--threads N]
//
// Exit codes: 0 ok, 2 config / model / resource error, 3 audit failure,
// 4 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "config.hpp"
#include "experiments.hpp"
#include "kolmo/error.hpp"
#include "output.hpp"

namespace {

using namespace kolmo;
using namespace kolmo::app;

enum Exit { ok = 0, config_error = 2, audit_failure = 3, numerical_failure = 4 };

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

int report_error(const Options& o, int code, const std::string& kind, const std::string& msg) {
    const nlohmann::json rec = {{"status", "error"}, {"kind", kind}, {"exit_code", code}, {"message", msg}};
    std::cerr << rec.dump() << '\n';
    if (!o.out.empty()) {
        try {
            write_atomic(o.out, "error.json", rec.dump(2) + "\n");
        } catch (const std::exception&) {
            // the record already went to stderr
        }
    }
    return code;
}

Config load(const Options& o) {
    Config c = load_config(o.config);
    if (o.seed) override_seed(c, *o.seed);
    if (o.threads) override_threads(c, *o.threads);
    return c;
}

int finish(const Options& o, const std::string& command, const Config& c, std::vector<Artifact> files,
           const AuditReport& audit) {
    files.push_back({"audit.json", audit.to_json().dump(2) + "\n"});
    if (!o.out.empty()) {
        for (const auto& f : files) write_atomic(o.out, f.name, f.content);
        write_atomic(o.out, "manifest.json", manifest(command, c.resolved, files).dump(2) + "\n");
        std::remove((std::filesystem::path(o.out) / "error.json").c_str());
    } else {
        std::cout << files.back().content;
    }
    for (const auto& ch : audit.checks)
        if (ch.applicable && !ch.pass) std::cerr << "audit failed: " << ch.name << '\n';
    return audit.failed() ? audit_failure : ok;
}

int guarded(const Options& o, const std::function<int()>& body) {
    try {
        return body();
    } catch (const NumericalError& e) {
        return report_error(o, numerical_failure, "numerical", e.what());
    } catch (const ModelError& e) {
        return report_error(o, config_error, "model", e.what());
    } catch (const ResourceError& e) {
        return report_error(o, config_error, "resource", e.what());
    } catch (const ConfigError& e) {
        return report_error(o, config_error, "config", e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return report_error(o, config_error, "io", e.what());
    } catch (const std::exception& e) {
        return report_error(o, numerical_failure, "internal", e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kolmogorov-equation simulator on Hermite bases with a Monte Carlo oracle"};
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* sub) {
        sub->add_option("config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "override the config seed");
        sub->add_option("--threads", o.threads, "worker threads for Monte Carlo (0: runtime default)")
            ->check(CLI::NonNegativeNumber);
    };
    auto* run_cmd = app.add_subcommand("run", "run the experiment and write its outputs");
    common(run_cmd);
    run_cmd->add_option("--out", o.out, "output directory")->required();
    auto* audit_cmd = app.add_subcommand("audit", "run every bound audit for the configured system");
    common(audit_cmd);
    audit_cmd->add_option("--out", o.out, "output directory (default: print audit.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : config_error;
    }

    if (*run_cmd) {
        return guarded(o, [&] {
            const Config c = load(o);
            auto out = run(c);
            return finish(o, "run", c, std::move(out.files), out.audit);
        });
    }
    return guarded(o, [&] {
        const Config c = load(o);
        return finish(o, "audit", c, {}, run_audit(c));
    });
}
