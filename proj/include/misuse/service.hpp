#pragma once

// HTTP service over the shared command layer.
//
//   POST /v1/evaluate            risks and uplift
//   POST /v1/simulate[?stream=1] what-if series; stream=1 sends NDJSON progress
//   POST /v1/gate                pre-deployment and monitoring decisions
//   POST /v1/ingest              session logs to evasion curves
//   GET  /v1/runs/{digest}       stored run record
//   GET  /v1/health
//
// Request bodies are scenario documents (JSON or YAML). simulate and gate
// accept ?seed= and ?runs= overrides.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace misuse {

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path run_dir = "runs";
    // Relative session-log paths in request bodies resolve against this.
    std::filesystem::path base_dir = ".";
    std::size_t max_runs = 10000;
    unsigned max_concurrent_runs = 2;
    unsigned simulation_threads = 0;
    std::optional<std::filesystem::path> ui_dir;
};

class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds options.host on a free port and returns it (for tests).
    int bind_any_port();
    // Blocks serving on a port bound by bind_any_port.
    bool listen_after_bind();
    // Binds options.host:options.port and blocks.
    bool listen();
    void wait_until_ready() const;
    void stop();

    const ServiceOptions& options() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace misuse
