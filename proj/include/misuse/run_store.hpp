#pragma once

// Content-addressed run records: an in-memory cache backed by one JSON file
// per run digest under a run directory. Identical digests hold identical
// outputs, so concurrent writers may race freely (last write wins).

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <json.hpp>

namespace misuse {

// MISUSE_RISK_RUN_DIR, or ./runs when unset.
std::filesystem::path default_run_directory();

bool is_run_digest(const std::string& text);

class RunStore {
public:
    explicit RunStore(std::filesystem::path directory);

    // Keyed by record["run_digest"].
    void put(const nlohmann::json& record);
    std::optional<nlohmann::json> get(const std::string& digest) const;

    const std::filesystem::path& directory() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::string, nlohmann::json> cache_;
};

}  // namespace misuse
