#include "misuse/whatif.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "misuse/errors.hpp"
#include "misuse/simd/kernels.hpp"

namespace misuse {

namespace {

constexpr double kDaysPerYear = 365.0;
// Day bins past this effort quantile carry negligible mass and are skipped.
constexpr double kEffortTail = 1e-12;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

simd::PiecewiseLinearView view(const TimeCostCurve& c) {
    return {c.times(), c.probabilities(), c.slopes()};
}

std::size_t day_count(const WhatIfConfig& cfg) {
    return static_cast<std::size_t>(std::ceil(cfg.simulation_end));
}

double quantile_type7(std::vector<double>& v, double q) {
    std::sort(v.begin(), v.end());
    const double h = static_cast<double>(v.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

struct Scratch {
    std::vector<double> cdf;
    std::vector<double> prob;
};

void fill_effort_cdf(const EffortDistribution& effort, const simd::Kernels& k, double x0,
                     std::span<double> out) {
    switch (effort.kind()) {
        case EffortDistribution::Kind::exponential:
            k.exponential_cdf(effort.mean_days(), x0, 1.0, out);
            return;
        case EffortDistribution::Kind::lognormal:
            k.lognormal_cdf(effort.log_mean(), effort.log_sd(), x0, 1.0, out);
            return;
        case EffortDistribution::Kind::empirical:
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = effort.cdf_below(x0 + static_cast<double>(i));
            }
            return;
    }
}

// Adds one attempt's expected successes per day into `daily`.
void accumulate_attempt(const WhatIfConfig& cfg, double start, double effort_hi,
                        const simd::Kernels& kernels, Scratch& scratch,
                        std::vector<double>& daily) {
    const auto n_days = static_cast<std::int64_t>(daily.size());
    const auto d_lo = static_cast<std::int64_t>(std::ceil(start));
    const auto d_hi = std::min<std::int64_t>(
        n_days, static_cast<std::int64_t>(std::floor(start + effort_hi)) + 2);
    if (d_lo >= d_hi) {
        return;
    }
    const auto n = static_cast<std::size_t>(d_hi - d_lo);
    const double x0 = static_cast<double>(d_lo) - start;

    scratch.cdf.resize(n + 1);
    scratch.prob.resize(n);
    fill_effort_cdf(cfg.effort, kernels, x0, scratch.cdf);

    // Days before the jailbreak follow p_post; later days follow p_pre.
    std::size_t split = n;
    if (std::isfinite(cfg.jailbreak_time)) {
        const double first_jb_day = std::ceil(cfg.jailbreak_time);
        split = static_cast<std::size_t>(
            std::clamp<double>(first_jb_day - static_cast<double>(d_lo), 0.0,
                               static_cast<double>(n)));
    }
    std::span<double> prob(scratch.prob);
    if (split > 0) {
        kernels.eval_time_cost(view(cfg.p_post), x0, 1.0, prob.first(split));
    }
    if (split < n) {
        double pre_x0 = 0.0;
        if (start >= cfg.jailbreak_time) {
            pre_x0 = x0 + static_cast<double>(split);
        } else {
            const AttemptTrajectory traj(start, cfg);
            pre_x0 = traj.matched_time() +
                     (static_cast<double>(d_lo) + static_cast<double>(split) - cfg.jailbreak_time);
        }
        kernels.eval_time_cost(view(cfg.p_pre), pre_x0, 1.0, prob.subspan(split));
    }
    kernels.accumulate_bin_mass(scratch.prob, scratch.cdf,
                                std::span<double>(daily).subspan(static_cast<std::size_t>(d_lo), n));
}

RiskSeries finish_series(std::vector<double> daily, double damage) {
    RiskSeries s;
    s.day_index.resize(daily.size());
    for (std::size_t d = 0; d < daily.size(); ++d) {
        s.day_index[d] = static_cast<std::int64_t>(d);
        daily[d] = daily[d] * kDaysPerYear * damage;
    }
    s.annualized_risk = std::move(daily);
    return s;
}

}  // namespace

void validate(const WhatIfConfig& cfg) {
    if (!(std::isfinite(cfg.simulation_end) && cfg.simulation_end > 0.0)) {
        throw ValidationError("range", "simulation_end must be positive and finite",
                              "simulation_end_days");
    }
    if (!(cfg.jailbreak_time >= 0.0)) {
        throw ValidationError("range", "jailbreak_time must be >= 0 (or never)",
                              "jailbreak_time_days");
    }
    if (cfg.runs < 1) {
        throw ValidationError("range", "runs must be at least 1", "runs");
    }
    if (!(std::isfinite(cfg.attempts_per_year) && cfg.attempts_per_year >= 0.0)) {
        throw ValidationError("range", "attempts_per_year must be finite and >= 0",
                              "attempts_per_year");
    }
    if (!(std::isfinite(cfg.damage_per_success) && cfg.damage_per_success >= 0.0)) {
        throw ValidationError("range", "damage_per_success must be finite and >= 0",
                              "damage_units_per_success");
    }
}

std::vector<std::string> simulation_warnings(const WhatIfConfig& cfg) {
    std::vector<std::string> out;
    if (cfg.p_post.max_probability() > cfg.p_pre.max_probability()) {
        std::ostringstream os;
        os << "p_post reaches " << cfg.p_post.max_probability()
           << ", above the p_pre maximum " << cfg.p_pre.max_probability()
           << "; progress matching clamps to the p_pre maximum";
        out.push_back(os.str());
    }
    return out;
}

AttemptTrajectory::AttemptTrajectory(double start, const WhatIfConfig& cfg)
    : cfg_(&cfg), start_(start) {
    if (start < cfg.jailbreak_time && std::isfinite(cfg.jailbreak_time)) {
        const double progress = cfg.p_post(cfg.jailbreak_time - start);
        if (progress > cfg.p_pre.max_probability()) {
            clamped_ = true;
            matched_time_ = invert_monotone(cfg.p_pre, cfg.p_pre.max_probability());
        } else {
            matched_time_ = invert_monotone(cfg.p_pre, progress);
        }
    }
}

double AttemptTrajectory::operator()(double t) const {
    if (!(t >= 0.0)) {
        throw DomainError("attempt success evaluated at negative time");
    }
    if (t < start_) {
        return 0.0;
    }
    if (t < cfg_->jailbreak_time) {
        return cfg_->p_post(t - start_);
    }
    if (start_ >= cfg_->jailbreak_time) {
        return cfg_->p_pre(t - start_);
    }
    return cfg_->p_pre(matched_time_ + (t - cfg_->jailbreak_time));
}

double attempt_success(double t, double start, const WhatIfConfig& cfg) {
    return AttemptTrajectory(start, cfg)(t);
}

std::uint64_t derive_run_seed(std::uint64_t master, std::uint64_t run_index) {
    return splitmix64(splitmix64(master) ^ (run_index * 0xD1B54A32D192ED03ULL + 1));
}

std::vector<double> sample_attempt_starts(const WhatIfConfig& cfg, std::uint64_t seed) {
    const auto count = static_cast<std::size_t>(
        std::llround(cfg.attempts_per_year * cfg.simulation_end / kDaysPerYear));
    std::mt19937_64 rng(seed);
    std::vector<double> starts(count);
    for (auto& s : starts) {
        const double u = static_cast<double>(rng() >> 11) * 0x1p-53;
        s = u * cfg.simulation_end;
    }
    return starts;
}

RiskSeries simulate_attempts(const WhatIfConfig& cfg, const std::vector<double>& starts) {
    validate(cfg);
    std::vector<double> daily(day_count(cfg), 0.0);
    const double effort_hi = cfg.effort.is_continuous() ? cfg.effort.quantile(1.0 - kEffortTail)
                                                        : cfg.effort.atoms().back().days;
    const simd::Kernels& kernels = simd::active_kernels();
    Scratch scratch;
    for (const double s : starts) {
        accumulate_attempt(cfg, s, effort_hi, kernels, scratch, daily);
    }
    return finish_series(std::move(daily), cfg.damage_per_success);
}

RiskSeries run_once(const WhatIfConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    return simulate_attempts(cfg, sample_attempt_starts(cfg, seed));
}

RiskSeries monte_carlo(const WhatIfConfig& cfg, const MonteCarloOptions& options) {
    validate(cfg);
    const std::size_t runs = cfg.runs;
    unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
    threads = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, runs));

    std::vector<std::vector<double>> results(runs);
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::condition_variable cv;
    std::size_t done = 0;
    std::exception_ptr failure;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= runs) return;
            try {
                results[i] = run_once(cfg, derive_run_seed(cfg.rng_seed, i)).annualized_risk;
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
            {
                std::lock_guard lock(mu);
                ++done;
            }
            cv.notify_one();
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    {
        std::size_t reported = 0;
        std::unique_lock lock(mu);
        while (reported < runs) {
            cv.wait(lock, [&] { return done > reported; });
            const std::size_t now = done;
            lock.unlock();
            if (options.progress) options.progress(now, runs);
            lock.lock();
            reported = now;
        }
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);

    const std::size_t n_days = day_count(cfg);
    RiskSeries out;
    out.day_index.resize(n_days);
    out.annualized_risk.assign(n_days, 0.0);
    RiskBands bands;
    bands.p05.resize(n_days);
    bands.p50.resize(n_days);
    bands.p95.resize(n_days);
    std::vector<double> column(runs);
    for (std::size_t d = 0; d < n_days; ++d) {
        out.day_index[d] = static_cast<std::int64_t>(d);
        double sum = 0.0;
        for (std::size_t r = 0; r < runs; ++r) {
            column[r] = results[r][d];
            sum += column[r];
        }
        out.annualized_risk[d] = sum / static_cast<double>(runs);
        bands.p05[d] = quantile_type7(column, 0.05);
        bands.p50[d] = quantile_type7(column, 0.50);
        bands.p95[d] = quantile_type7(column, 0.95);
    }
    out.bands = std::move(bands);
    return out;
}

std::optional<double> crossing_latency(const RiskSeries& series, double threshold,
                                       double jailbreak_time) {
    if (!(threshold > 0.0)) {
        throw ValidationError("range", "crossing threshold must be positive", "threshold");
    }
    if (!std::isfinite(jailbreak_time)) {
        return std::nullopt;
    }
    for (std::size_t i = 0; i < series.day_index.size(); ++i) {
        const auto day = static_cast<double>(series.day_index[i]);
        if (day >= jailbreak_time && series.annualized_risk[i] > threshold) {
            return day - jailbreak_time;
        }
    }
    return std::nullopt;
}

}  // namespace misuse
