#include "misuse/run_store.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "misuse/errors.hpp"

namespace misuse {

std::filesystem::path default_run_directory() {
    if (const char* env = std::getenv("MISUSE_RISK_RUN_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "runs";
}

bool is_run_digest(const std::string& text) {
    return text.size() == 64 && text.find_first_not_of("0123456789abcdef") == std::string::npos;
}

RunStore::RunStore(std::filesystem::path directory) : dir_(std::move(directory)) {}

void RunStore::put(const nlohmann::json& record) {
    const std::string digest = record.at("run_digest").get<std::string>();
    if (!is_run_digest(digest)) {
        throw InternalError("malformed run digest");
    }
    {
        std::lock_guard lock(mu_);
        cache_[digest] = record;
    }
    static std::atomic<std::uint64_t> counter{0};
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
        throw Error("cannot create run directory " + dir_.string() + ": " + ec.message());
    }
    std::ostringstream tmp_name;
    tmp_name << digest << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id())
             << "." << counter.fetch_add(1);
    const auto tmp = dir_ / tmp_name.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << record.dump(2) << "\n";
        if (!out.flush()) {
            throw Error("cannot write run record " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, dir_ / (digest + ".json"), ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error("cannot store run record " + digest);
    }
}

std::optional<nlohmann::json> RunStore::get(const std::string& digest) const {
    if (!is_run_digest(digest)) {
        return std::nullopt;
    }
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(digest); it != cache_.end()) {
        return it->second;
    }
    std::ifstream in(dir_ / (digest + ".json"), std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    try {
        nlohmann::json record = nlohmann::json::parse(in);
        cache_[digest] = record;
        return record;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

}  // namespace misuse
