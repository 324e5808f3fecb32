// misuse-risk: command-line front end for the misuse risk engine.
//
// Exit codes: 0 success, 1 validation or model error, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "misuse/commands.hpp"
#include "misuse/errors.hpp"
#include "misuse/run_store.hpp"
#include "misuse/scenario.hpp"
#include "misuse/service.hpp"

namespace {

using misuse::ResolvedScenario;
using nlohmann::json;

struct Common {
    std::string scenario;
    std::string out;
    std::string format;
    bool record = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> runs;
    unsigned threads = 0;
};

void emit(const Common& c, const std::string& text) {
    if (c.out.empty() || c.out == "-") {
        std::fwrite(text.data(), 1, text.size(), stdout);
        std::fflush(stdout);
        return;
    }
    std::ofstream f(c.out, std::ios::binary | std::ios::trunc);
    if (!f || !(f << text) || !f.flush()) {
        throw misuse::UsageError("cannot write output file " + c.out);
    }
}

ResolvedScenario load(const Common& c) {
    ResolvedScenario s = misuse::load_resolved_scenario(c.scenario);
    for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
    return s;
}

void maybe_record(const Common& c, const ResolvedScenario& s, const std::string& command,
                  std::uint64_t seed, std::size_t runs, const json& outputs) {
    if (!c.record) return;
    misuse::RunStore store(misuse::default_run_directory());
    const json record = misuse::make_run_record(s, command, seed, runs, outputs);
    store.put(record);
    std::cerr << "run " << record.at("run_digest").get<std::string>() << " stored in "
              << store.directory().string() << "\n";
}

misuse::MonteCarloOptions mc(const Common& c) {
    misuse::MonteCarloOptions m;
    m.threads = c.threads;
    return m;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void print_warnings(const std::vector<std::string>& warnings,
                    const std::vector<std::string>& already) {
    for (const auto& w : warnings) {
        if (std::find(already.begin(), already.end(), w) == already.end()) {
            std::cerr << "warning: " << w << "\n";
        }
    }
}

void cmd_evaluate(const Common& c) {
    const ResolvedScenario s = load(c);
    const misuse::EvaluateResult r = misuse::run_evaluate(s);
    print_warnings(r.warnings, s.warnings);
    const json j = misuse::to_json(r);
    emit(c, c.format == "json" ? dump(j) : misuse::format_text(r));
    maybe_record(c, s, "evaluate", 0, 0, j);
}

void cmd_simulate(const Common& c) {
    const ResolvedScenario s = load(c);
    const misuse::SimulationRequest req{c.seed, c.runs};
    const misuse::WhatIfConfig cfg = misuse::simulation_config(s, req);
    const misuse::RiskSeries series = misuse::run_simulate(s, req, mc(c));
    const json j = {{"series", misuse::to_json(series)}};
    emit(c, c.format == "json" ? dump(j) : misuse::format_csv(series));
    maybe_record(c, s, "simulate", cfg.rng_seed, cfg.runs, j);
}

void cmd_gate(const Common& c) {
    const ResolvedScenario s = load(c);
    const misuse::SimulationRequest req{c.seed, c.runs};
    const misuse::WhatIfConfig cfg = misuse::simulation_config(s, req);
    const misuse::GateResult g = misuse::run_gate(s, req, mc(c));
    print_warnings(g.estimates.warnings, s.warnings);
    const json j = misuse::to_json(g);
    emit(c, c.format == "json" ? dump(j) : misuse::format_text(g));
    maybe_record(c, s, "gate", cfg.rng_seed, cfg.runs, j);
}

void cmd_ingest(const Common& c) {
    const ResolvedScenario s = load(c);
    const json j = misuse::run_ingest(s);
    emit(c, c.format == "json" ? dump(j) : misuse::format_ingest_text(j));
}

void cmd_report(const Common& c) {
    const ResolvedScenario s = load(c);
    const misuse::SafetyCaseReport r = misuse::run_report(s, mc(c));
    emit(c, c.format == "json" ? dump(misuse::to_json(r)) : misuse::render_text(r));
}

misuse::ServiceOptions parse_listen(const std::string& listen) {
    misuse::ServiceOptions o;
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) {
        throw misuse::UsageError("--listen expects host:port");
    }
    o.host = listen.substr(0, colon);
    try {
        std::size_t used = 0;
        const std::string port = listen.substr(colon + 1);
        o.port = std::stoi(port, &used);
        if (used != port.size() || o.port < 0 || o.port > 65535) throw std::out_of_range("port");
    } catch (const std::logic_error&) {
        throw misuse::UsageError("--listen port must be an integer in [0, 65535]");
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Misuse risk engine: uplift estimates, what-if simulation and deployment gates"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(misuse::engine_version()));

    Common c;
    auto add_common = [&](CLI::App* sub, std::vector<std::string> formats) {
        sub->add_option("--scenario", c.scenario, "Scenario file (YAML or JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", c.out, "Output file (default: standard output)");
        sub->add_option("--format", c.format, "Output format (default: " + formats.front() + ")")
            ->check(CLI::IsMember(formats));
    };
    auto add_sim = [&](CLI::App* sub) {
        sub->add_option("--runs", c.runs, "Monte Carlo runs (default: whatif.runs)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", c.seed, "Master RNG seed (default: whatif.rng_seed)");
        sub->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
    };
    auto add_record = [&](CLI::App* sub) {
        sub->add_flag("--record", c.record,
                      "Store a run record under $MISUSE_RISK_RUN_DIR (default ./runs)");
    };

    auto* evaluate = app.add_subcommand("evaluate", "Annualized risks and uplift");
    add_common(evaluate, {"text", "json"});
    add_record(evaluate);

    auto* simulate = app.add_subcommand("simulate", "What-if deployment series");
    add_common(simulate, {"csv", "json"});
    add_sim(simulate);
    add_record(simulate);

    auto* gate = app.add_subcommand("gate", "Pre-deployment and monitoring decisions");
    add_common(gate, {"text", "json"});
    add_sim(gate);
    add_record(gate);

    auto* ingest = app.add_subcommand("ingest", "Red-team session logs to evasion cost curves");
    add_common(ingest, {"text", "json"});

    auto* report = app.add_subcommand("report", "Safety-case claim tree with computed values");
    add_common(report, {"text", "json"});
    report->add_option("--threads", c.threads, "Worker threads (0 = all cores)");

    auto* serve = app.add_subcommand("serve", "HTTP service");
    std::string listen = "127.0.0.1:8080";
    std::string ui_dir;
    std::string base_dir = ".";
    misuse::ServiceOptions defaults;
    std::size_t max_runs = defaults.max_runs;
    unsigned max_concurrent = defaults.max_concurrent_runs;
    serve->add_option("--listen", listen, "host:port to listen on")->capture_default_str();
    serve->add_option("--ui-dir", ui_dir, "Static files served at /")->check(CLI::ExistingDirectory);
    serve->add_option("--base-dir", base_dir, "Directory for relative session-log paths")
        ->capture_default_str();
    serve->add_option("--max-runs", max_runs, "Largest runs value accepted per request")
        ->capture_default_str();
    serve->add_option("--max-concurrent", max_concurrent, "Simulations allowed at once")
        ->capture_default_str();
    serve->add_option("--threads", c.threads, "Worker threads per simulation (0 = all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*evaluate) cmd_evaluate(c);
        if (*simulate) cmd_simulate(c);
        if (*gate) cmd_gate(c);
        if (*ingest) cmd_ingest(c);
        if (*report) cmd_report(c);
        if (*serve) {
            misuse::ServiceOptions o = parse_listen(listen);
            o.run_dir = misuse::default_run_directory();
            o.base_dir = base_dir;
            o.max_runs = max_runs;
            o.max_concurrent_runs = std::max(1u, max_concurrent);
            o.simulation_threads = c.threads;
            if (!ui_dir.empty()) o.ui_dir = ui_dir;
            misuse::Service service(o);
            std::cerr << "listening on " << o.host << ":" << o.port << "\n";
            if (!service.listen()) {
                std::cerr << "error: cannot listen on " << listen << "\n";
                return 1;
            }
        }
    } catch (const misuse::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const misuse::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
