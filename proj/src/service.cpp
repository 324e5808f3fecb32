#include "misuse/service.hpp"

#include <httplib.h>

#include <atomic>
#include <charconv>

#include "misuse/commands.hpp"
#include "misuse/errors.hpp"
#include "misuse/run_store.hpp"
#include "misuse/simd/kernels.hpp"

namespace misuse {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump() + "\n", kJson);
}

json error_body(const std::exception& e) {
    json j = {{"error", e.what()}};
    if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
        j["kind"] = v->kind();
        j["field"] = v->field();
    }
    return j;
}

int status_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return 400;
    if (dynamic_cast<const InternalError*>(&e)) return 500;
    if (dynamic_cast<const Error*>(&e)) return 422;
    return 500;
}

std::optional<std::uint64_t> query_u64(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    const std::string v = req.get_param_value(name);
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) {
        throw ValidationError("schema", std::string(name) + " must be a non-negative integer",
                              name);
    }
    return out;
}

// Releases a run-queue slot on scope exit.
class Slot {
public:
    explicit Slot(std::atomic<unsigned>& active) : active_(&active) {}
    Slot(Slot&& other) noexcept : active_(std::exchange(other.active_, nullptr)) {}
    Slot& operator=(Slot&&) = delete;
    ~Slot() {
        if (active_) active_->fetch_sub(1);
    }

private:
    std::atomic<unsigned>* active_;
};

class QueueFull : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace

struct Service::Impl {
    ServiceOptions options;
    httplib::Server server;
    RunStore store;
    std::atomic<unsigned> active{0};

    explicit Impl(ServiceOptions opts) : options(std::move(opts)), store(options.run_dir) {
        routes();
    }

    ResolvedScenario scenario(const httplib::Request& req) const {
        return resolve_scenario(scenario_from_text(req.body, "request body"), options.base_dir);
    }

    Slot acquire() {
        unsigned cur = active.load();
        do {
            if (cur >= options.max_concurrent_runs) {
                throw QueueFull("run queue is full (" + std::to_string(options.max_concurrent_runs) +
                                " simulations in progress); retry later");
            }
        } while (!active.compare_exchange_weak(cur, cur + 1));
        return Slot(active);
    }

    SimulationRequest simulation_request(const httplib::Request& req,
                                         const ResolvedScenario& s) const {
        SimulationRequest out;
        out.seed = query_u64(req, "seed");
        if (auto runs = query_u64(req, "runs")) out.runs = static_cast<std::size_t>(*runs);
        const std::size_t runs = out.runs.value_or(s.whatif.runs);
        if (runs > options.max_runs) {
            throw UsageError("runs " + std::to_string(runs) + " exceeds the server cap of " +
                             std::to_string(options.max_runs) + " runs (max_runs)");
        }
        return out;
    }

    MonteCarloOptions mc() const {
        MonteCarloOptions m;
        m.threads = options.simulation_threads;
        return m;
    }

    template <class Fn>
    void guarded(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const QueueFull& e) {
            send_json(res, 503, {{"error", e.what()}});
        } catch (const std::exception& e) {
            send_json(res, status_for(e), error_body(e));
        }
    }

    // Returns the stored record for this run, computing and storing it if needed.
    template <class Compute>
    json record_for(const ResolvedScenario& s, const std::string& command, std::uint64_t seed,
                    std::size_t runs, Compute&& compute) {
        if (auto cached = store.get(run_digest(s.digest, command, seed, runs))) {
            return *cached;
        }
        json record = make_run_record(s, command, seed, runs, compute());
        store.put(record);
        return record;
    }

    void routes() {
        server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200,
                      {{"status", "ok"},
                       {"engine_version", engine_version()},
                       {"simd", simd::active_kernels().name},
                       {"max_runs", options.max_runs}});
        });

        server.Post("/v1/evaluate", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const ResolvedScenario s = scenario(req);
                send_json(res, 200, record_for(s, "evaluate", 0, 0, [&] {
                              return to_json(run_evaluate(s));
                          }));
            });
        });

        server.Post("/v1/ingest", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const ResolvedScenario s = scenario(req);
                send_json(res, 200, record_for(s, "ingest", 0, 0, [&] { return run_ingest(s); }));
            });
        });

        server.Post("/v1/gate", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const ResolvedScenario s = scenario(req);
                const SimulationRequest sim = simulation_request(req, s);
                const WhatIfConfig cfg = simulation_config(s, sim);
                const std::string digest = run_digest(s.digest, "gate", cfg.rng_seed, cfg.runs);
                if (auto cached = store.get(digest)) {
                    send_json(res, 200, *cached);
                    return;
                }
                Slot slot = acquire();
                send_json(res, 200, record_for(s, "gate", cfg.rng_seed, cfg.runs, [&] {
                              return to_json(run_gate(s, sim, mc()));
                          }));
            });
        });

        server.Post("/v1/simulate", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { simulate(req, res); });
        });

        server.Get(R"(/v1/runs/([^/]+))", [this](const httplib::Request& req,
                                                 httplib::Response& res) {
            const std::string digest = req.matches[1];
            if (auto record = store.get(digest)) {
                send_json(res, 200, *record);
            } else {
                send_json(res, 404, {{"error", "unknown run digest " + digest}});
            }
        });

        if (options.ui_dir) {
            server.set_mount_point("/", options.ui_dir->string());
        }
    }

    void simulate(const httplib::Request& req, httplib::Response& res) {
        auto s = std::make_shared<ResolvedScenario>(scenario(req));
        const SimulationRequest sim = simulation_request(req, *s);
        const WhatIfConfig cfg = simulation_config(*s, sim);
        const std::string digest = run_digest(s->digest, "simulate", cfg.rng_seed, cfg.runs);
        const bool stream = req.has_param("stream") && req.get_param_value("stream") != "0";

        std::optional<json> cached = store.get(digest);
        std::shared_ptr<Slot> slot;
        if (!cached) slot = std::make_shared<Slot>(acquire());

        if (!stream) {
            send_json(res, 200, cached ? *cached : record_for(*s, "simulate", cfg.rng_seed, cfg.runs, [&] {
                return json{{"series", to_json(run_simulate(*s, sim, mc()))}};
            }));
            return;
        }

        res.status = 200;
        res.set_chunked_content_provider(
            "application/x-ndjson",
            [this, s, sim, cfg, cached, slot](std::size_t, httplib::DataSink& sink) {
                auto line = [&](const json& j) {
                    const std::string text = j.dump() + "\n";
                    return sink.write(text.data(), text.size());
                };
                try {
                    json record;
                    if (cached) {
                        record = *cached;
                    } else {
                        MonteCarloOptions m = mc();
                        m.progress = [&](std::size_t done, std::size_t total) {
                            line({{"progress", {{"completed_runs", done}, {"total_runs", total}}}});
                        };
                        record = record_for(*s, "simulate", cfg.rng_seed, cfg.runs, [&] {
                            return json{{"series", to_json(run_simulate(*s, sim, m))}};
                        });
                    }
                    line({{"result", record}});
                } catch (const std::exception& e) {
                    json err = error_body(e);
                    err["status"] = status_for(e);
                    line(err);
                }
                sink.done();
                return true;
            });
    }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() { stop(); }

int Service::bind_any_port() { return impl_->server.bind_to_any_port(impl_->options.host); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

bool Service::listen() { return impl_->server.listen(impl_->options.host, impl_->options.port); }

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

void Service::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

const ServiceOptions& Service::options() const noexcept { return impl_->options; }

}  // namespace misuse
