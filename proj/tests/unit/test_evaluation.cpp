#include <doctest.h>

#include <random>
#include <vector>

#include "misuse/errors.hpp"
#include "misuse/evaluation.hpp"
#include "oracles.hpp"

using namespace misuse;

namespace {

RedTeamSession session(std::vector<SessionEvent> events, std::string id = "a1") {
    return {std::move(id), ActorPool::contractor, std::move(events), {}};
}

std::vector<CurvePoint> knots(const EvasionCostCurve& c) { return c.points(); }

std::vector<double> scores(const RedTeamSession& s) {
    std::vector<double> out;
    for (const auto& e : s.events) {
        if (e.kind == EventKind::fulfillment) out.push_back(*e.score);
    }
    return out;
}

EvasionCostCurve linear(double slope) {
    return make_evasion_cost_curve({{0, 0}, {1, slope}, {2, 2 * slope}});
}

// Random valid session with optional bans and jailbreak ids.
RedTeamSession random_session(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RedTeamSession s{"r", ActorPool::bounty, {}, {}};
    double t = 0.0;
    const int n = 1 + static_cast<int>(u(rng) * 20);
    for (int i = 0; i < n; ++i) {
        t += u(rng) * 0.7;
        const double roll = u(rng);
        if (roll < 0.15) {
            s.events.push_back(SessionEvent::ban(t));
        } else if (roll < 0.25) {
            s.events.push_back(SessionEvent::discovery(t, "J" + std::to_string(i % 3)));
        } else {
            std::optional<std::string> jb;
            if (u(rng) < 0.6) jb = "J" + std::to_string(static_cast<int>(u(rng) * 3));
            s.events.push_back(SessionEvent::fulfill(t, u(rng), jb));
        }
    }
    return s;
}

}  // namespace

TEST_CASE("worked actor curves") {
    const BanCostModel bans{0.5, "test"};
    CHECK(knots(build_actor_curve(
              session({SessionEvent::fulfill(0.1, 1.0), SessionEvent::fulfill(0.3, 1.0)}), bans)) ==
          std::vector<CurvePoint>{{0, 0}, {1, 0.1}, {2, 0.3}});
    CHECK(knots(build_actor_curve(session({SessionEvent::fulfill(0.1, 1.0), SessionEvent::ban(0.2),
                                           SessionEvent::fulfill(0.3, 1.0)}),
                                  bans)) == std::vector<CurvePoint>{{0, 0}, {1, 0.1}, {2, 0.8}});
    CHECK(knots(build_actor_curve(
              session({SessionEvent::fulfill(0.2, 0.4), SessionEvent::fulfill(0.5, 0.6)}), bans)) ==
          std::vector<CurvePoint>{{0, 0}, {0.4, 0.2}, {1.0, 0.5}});
}

TEST_CASE("empty session gives the degenerate curve") {
    const auto c = build_actor_curve(session({}), BanCostModel{});
    CHECK(knots(c) == std::vector<CurvePoint>{{0, 0}});
    CHECK(c(10) == 0.0);
}

TEST_CASE("session validation") {
    CHECK_THROWS_AS(validate_session(session({SessionEvent::fulfill(0.5, 1), SessionEvent::fulfill(0.2, 1)})),
                    ValidationError);
    CHECK_THROWS_AS(validate_session(session({SessionEvent::fulfill(0.5, 1.5)})), ValidationError);
    SessionEvent bad = SessionEvent::ban(1.0);
    bad.score = 0.5;
    CHECK_THROWS_AS(validate_session(session({bad})), ValidationError);
    CHECK_THROWS_AS(validate(BanCostModel{0.0, ""}), ValidationError);
    CHECK_THROWS_AS(validate(PatchPolicy{1.0, 0}), ValidationError);
    CHECK_THROWS_AS(validate(PatchPolicy{0.0, 3}), ValidationError);
}

TEST_CASE("patch after N fulfillments zeroes later reuse") {
    std::vector<SessionEvent> ev;
    for (int i = 0; i < 5; ++i) ev.push_back(SessionEvent::fulfill(0.1 * (i + 1), 1.0, "J"));
    const auto out = replay_with_patching(session(ev), PatchPolicy{1.0, 3});
    CHECK(scores(out) == std::vector<double>{1, 1, 1, 0, 0});
    REQUIRE(out.patch_times.size() == 1);
    CHECK(out.patch_times[0] == doctest::Approx(0.3));
}

TEST_CASE("wall-clock cadence fires before the count trigger") {
    const auto out = replay_with_patching(
        session({SessionEvent::fulfill(0.1, 1.0, "J"), SessionEvent::fulfill(0.2, 1.0, "J"),
                 SessionEvent::fulfill(1.5, 1.0, "J")}),
        PatchPolicy{1.0, 3});
    CHECK(scores(out) == std::vector<double>{1, 1, 0});
    REQUIRE_FALSE(out.patch_times.empty());
    CHECK(out.patch_times[0] == doctest::Approx(1.1));
}

TEST_CASE("fulfillments without a jailbreak are never patched") {
    const auto in = session({SessionEvent::fulfill(0.1, 1.0), SessionEvent::fulfill(0.2, 0.5),
                             SessionEvent::fulfill(3.0, 1.0), SessionEvent::fulfill(3.1, 1.0)});
    const auto out = replay_with_patching(in, PatchPolicy{1.0, 3});
    CHECK(out.events == in.events);
}

TEST_CASE("a new jailbreak found after a patch still works") {
    const auto out = replay_with_patching(
        session({SessionEvent::fulfill(0.1, 1, "J1"), SessionEvent::fulfill(0.2, 1, "J1"),
                 SessionEvent::fulfill(0.3, 1, "J1"), SessionEvent::fulfill(0.4, 1, "J2"),
                 SessionEvent::fulfill(0.5, 1, "J1")}),
        PatchPolicy{1.0, 3});
    CHECK(scores(out) == std::vector<double>{1, 1, 1, 1, 0});
}

TEST_CASE("variant expansion weights") {
    const std::vector<RedTeamSession> four(4, session({}));
    const auto a = expand_variants(four, {}, 1.0);
    CHECK(a.size() == 4);
    for (const auto& w : a) CHECK(w.weight == 1.0);

    const auto b = expand_variants({session({})}, std::vector<RedTeamSession>(3, session({})),
                                   1.0 / 3.0);
    double total = 0.0;
    for (const auto& w : b) total += w.weight;
    CHECK(total == doctest::Approx(2.0));
    CHECK_THROWS_AS(expand_variants({}, {session({})}, 0.0), ValidationError);
}

TEST_CASE("aggregation examples") {
    const std::vector<WeightedCurve> same{{linear(2), 1}, {linear(2), 1}};
    CHECK(aggregate_curves(same, AggregationMethod::weighted_mean()) == linear(2));

    const std::vector<WeightedCurve> pair{{linear(1), 1}, {linear(3), 1}};
    CHECK(aggregate_curves(pair, AggregationMethod::weighted_mean()).points() ==
          linear(2).points());
    CHECK(aggregate_curves(pair, AggregationMethod::lower_quantile(0.25)).points() ==
          linear(1).points());

    CHECK_THROWS_AS(aggregate_curves({}, AggregationMethod::weighted_mean()), ValidationError);
    CHECK_THROWS_AS(aggregate_curves(pair, AggregationMethod::lower_quantile(1.0)),
                    ValidationError);
}

TEST_CASE("weighted quantile aggregation matches the oracle") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        std::vector<WeightedCurve> ens;
        const int n = 1 + static_cast<int>(u(rng) * 6);
        for (int k = 0; k < n; ++k) {
            ens.push_back({make_evasion_cost_curve(oracle::random_evasion_curve(rng)),
                           0.1 + u(rng)});
        }
        const double q = 0.05 + 0.9 * u(rng);
        const auto agg = aggregate_curves(ens, AggregationMethod::lower_quantile(q));
        double running = 0.0;
        for (const double r : agg.requests()) {
            std::vector<std::pair<double, double>> samples;
            for (const auto& m : ens) samples.emplace_back(m.curve(r), m.weight);
            running = std::max(running, oracle::weighted_quantile(samples, q));
            CHECK(agg(r) == doctest::Approx(running).epsilon(1e-12));
        }
    }
}

TEST_CASE("singleton aggregation is the identity") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
        const auto c = make_evasion_cost_curve(oracle::random_evasion_curve(rng));
        const std::vector<WeightedCurve> one{{c, 0.7}};
        CHECK(aggregate_curves(one, AggregationMethod::lower_quantile(0.25)).points() ==
              c.points());
        CHECK(aggregate_curves(one, AggregationMethod::weighted_mean()).points() == c.points());
    }
}

TEST_CASE("quantile aggregation is monotone in q") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
        std::vector<WeightedCurve> ens;
        for (int k = 0; k < 5; ++k) {
            ens.push_back({make_evasion_cost_curve(oracle::random_evasion_curve(rng)), u(rng) + 0.1});
        }
        const double q1 = 0.05 + 0.4 * u(rng);
        const double q2 = q1 + 0.5 * u(rng);
        const auto lo = aggregate_curves(ens, AggregationMethod::lower_quantile(q1));
        const auto hi = aggregate_curves(ens, AggregationMethod::lower_quantile(q2));
        // Past the shared knot grid each side extrapolates with its own last slope.
        const double top = lo.requests().back();
        for (double r = 0; r <= top; r += 0.37) CHECK(lo(r) <= hi(r));
    }
}

TEST_CASE("fuzzed sessions: valid curves, bans and patches only add cost") {
    std::mt19937_64 rng(13);
    const BanCostModel bans{0.75, ""};
    for (int i = 0; i < 300; ++i) {
        const RedTeamSession s = random_session(rng);
        const EvasionCostCurve base = build_actor_curve(s, bans);
        const auto pts = base.points();
        for (std::size_t k = 1; k < pts.size(); ++k) {
            CHECK(pts[k].x > pts[k - 1].x);
            CHECK(pts[k].y >= pts[k - 1].y);
        }

        RedTeamSession more = s;
        const auto pos = more.events.begin() + static_cast<long>(more.events.size() / 2);
        const double at = pos == more.events.end() ? more.events.back().at_time : pos->at_time;
        more.events.insert(pos, SessionEvent::ban(at));
        const EvasionCostCurve banned = build_actor_curve(more, bans);

        const RedTeamSession patched = replay_with_patching(s, PatchPolicy{0.5, 2});
        const auto before = scores(s);
        const auto after = scores(patched);
        REQUIRE(before.size() == after.size());
        for (std::size_t k = 0; k < before.size(); ++k) CHECK(after[k] <= before[k]);
        const EvasionCostCurve slower = build_actor_curve(patched, bans);

        const double top = pts.back().x;
        for (double r = 0; r <= top; r += top / 50 + 1e-9) CHECK(banned(r) >= base(r));
        // Linear interpolation between knots can dip under the unpatched curve, so the
        // comparison is made where the patched curve is pinned by observed events.
        for (const auto& k : slower.points()) CHECK(k.y >= base(k.x) - 1e-12);
    }
}

TEST_CASE("actor curves are ordered by id, then variant flag") {
    std::vector<WeightedSession> ws{
        {session({SessionEvent::fulfill(1, 1)}, "b"), 1.0, false},
        {session({SessionEvent::fulfill(1, 1)}, "a"), 0.5, true},
        {session({SessionEvent::fulfill(2, 1)}, "a"), 1.0, false},
    };
    const auto out = build_actor_curves(ws, BanCostModel{}, std::nullopt);
    REQUIRE(out.size() == 3);
    CHECK(out[0].actor_id == "a");
    CHECK_FALSE(out[0].variant);
    CHECK(out[1].variant);
    CHECK(out[2].actor_id == "b");
}
