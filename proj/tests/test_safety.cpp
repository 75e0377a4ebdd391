#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "ospi/safety.hpp"
#include "ospi/tree_eval.hpp"

using namespace ospi;

namespace {

LdcfParams all_params(const Policy& pi, int h, int k, int d, int num_actions) {
    return LdcfParams{as_base_policy(pi), h, k, d, proposal_all(num_actions, d)};
}

double norm_inf(const ValueVector& v) {
    double out = 0.0;
    for (double x : v) {
        out = std::max(out, std::abs(x));
    }
    return out;
}

}  // namespace

TEST_CASE("counter-example instance") {
    const auto fig = fig1_counterexample();
    CHECK(fig.mdp.num_states() == 5);
    CHECK(fig.mdp.discount() == 0.9);
    const auto v_pi = policy_value(fig.mdp, fig.pi);
    CHECK(std::abs(v_pi[0] - 10.0) <= 1e-9);
    CHECK(std::abs(v_pi[0] - fig.v_pi_root) <= 1e-9);
    const auto online = induced_policy_value(fig.mdp, fig.cf, v_pi);
    CHECK(std::abs(online.value[0] - 0.0) <= 1e-9);
    CHECK(online.policy[0] == fig.online_action);
    CHECK(is_pi_consistent(fig.cf, as_base_policy(fig.pi), fig.mdp, {fig.root}).holds());
    const auto mono = is_monotonic(fig.cf, fig.mdp, {fig.root});
    CHECK(mono.verdict == Verdict::kViolated);
    REQUIRE(mono.witness.has_value());
    CHECK(*mono.witness == fig.monotonicity_witness);

    // hand recursion: a-loop then c, then c into the 600 transition
    CHECK(std::abs(fig.root_q[0].second - 0.9 * 0.9 * 600.0) <= 1e-9);

    // the theorem does not apply, and the check says why
    const auto r = check_theorem1(fig.mdp, fig.pi, fig.cf, v_pi);
    CHECK_FALSE(r.applicable);
    REQUIRE(r.witness.has_value());
    CHECK(r.witness->to_string() == "0;0;0;2;2");
}

TEST_CASE("check_theorem1 with exact leaf values") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Mdp m = random_mdp(seed, 5, 3, 2, 0.9);
        const Policy pi = random_policy(seed + 1, m);
        const auto cf = random_ldcf(seed + 2, m, pi, 3).build(3);
        const auto r = check_theorem1(m, pi, cf, policy_value(m, pi));
        REQUIRE(r.applicable);
        CHECK(r.epsilon <= 1e-9);
        CHECK(r.bound <= 1e-8);
        CHECK(r.holds());
    }
}

TEST_CASE("check_theorem1 with noisy leaf values on 500 MDPs") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> noise(-0.5, 0.5);
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const Mdp m = random_mdp(seed, 5, 3, 2, 0.9);
        const Policy pi = random_policy(seed + 1, m);
        const auto cf = random_ldcf(seed + 2, m, pi, 3).build(3);
        ValueVector u = policy_value(m, pi);
        for (double& x : u) {
            x += noise(rng);
        }
        const auto r = check_theorem1(m, pi, cf, u);
        REQUIRE(r.applicable);
        CHECK(r.worst_violation <= kCheckTol);
    }
}

TEST_CASE("check_theorem1 report arithmetic") {
    const Mdp m = random_mdp(3, 4, 2, 2, 0.9);
    const Policy pi = random_policy(4, m);
    const auto cf = make_lds(as_base_policy(pi), 3, 1, 2);
    const auto v_pi = policy_value(m, pi);
    const auto r = check_theorem1(m, pi, cf, ValueVector(4, 0.0));
    REQUIRE(r.applicable);
    CHECK(r.min_horizon == 3);
    CHECK(std::abs(r.epsilon - norm_inf(v_pi)) <= 1e-9);
    CHECK(std::abs(r.bound - 2.0 * r.epsilon * 0.729 / 0.1) <= 1e-9);
    CHECK(r.bound >= 0.0);

    // recompute the report from its own fields
    const auto online = induced_policy_value(m, cf, ValueVector(4, 0.0));
    double worst = -1e300;
    for (std::size_t s = 0; s < 4; ++s) {
        CHECK(std::abs(r.deltas[s] - (v_pi[s] - online.value[s])) <= 1e-9);
        worst = std::max(worst, r.deltas[s] - r.bound);
    }
    CHECK(std::abs(worst - r.worst_violation) <= 1e-12);
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j.at("epsilon").get<double>() == r.epsilon);
}

TEST_CASE("check_theorem1 rejects an inconsistent choice function") {
    const Mdp m = random_mdp(2, 3, 2, 1, 0.9);
    const Policy pi = {0, 0, 0};
    const auto cf = make_explicit(as_base_policy(pi), 2, 2, {{StatePath(0), {1}}});
    const auto r = check_theorem1(m, pi, cf, policy_value(m, pi));
    CHECK_FALSE(r.applicable);
    CHECK(r.holds());
    CHECK_FALSE(r.note.empty());
}

TEST_CASE("check_corollary1") {
    SUBCASE("singleton reduces to the theorem") {
        const Mdp m = random_mdp(5, 4, 2, 2, 0.9);
        const Policy pi = random_policy(6, m);
        const auto cf = make_lds(as_base_policy(pi), 3, 1, 2);
        const auto u = policy_value(m, pi);
        const auto c = check_corollary1(m, cf, u, {pi});
        const auto t = check_theorem1(m, pi, cf, u);
        CHECK(c.holds());
        CHECK(std::abs(c.worst_violation - t.worst_violation) <= 1e-9);
    }
    SUBCASE("every policy against full expansion") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Mdp m = random_mdp(seed, 3, 2, 2, 0.9);
            const auto policies = all_policies(m);
            REQUIRE(policies.size() == 8);
            std::mt19937_64 rng(seed);
            ValueVector u(3);
            for (double& x : u) {
                x = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
            }
            const auto r = check_corollary1(m, make_full_expansion(2, 2), u, policies);
            CHECK(r.applicable);
            CHECK(r.holds());
        }
    }
    SUBCASE("no consistent policy is a vacuous pass") {
        const Mdp m = random_mdp(1, 3, 2, 1, 0.9);
        const auto cf = make_rollout(as_base_policy({0, 0, 0}), 2, 2);
        const auto r = check_corollary1(m, cf, ValueVector(3, 0.0), {{1, 1, 1}});
        CHECK(r.holds());
        CHECK_FALSE(r.note.empty());
    }
}

TEST_CASE("check_theorem2") {
    SUBCASE("constant sequence matches the stationary result") {
        const Mdp m = random_mdp(7, 4, 2, 2, 0.9);
        const Policy pi = random_policy(8, m);
        const auto cf = make_lds(as_base_policy(pi), 3, 1, 2);
        const auto u = policy_value(m, pi);
        const auto t2 = check_theorem2(m, pi, {cf}, u, 150);
        const auto t1 = check_theorem1(m, pi, cf, u);
        REQUIRE(t2.applicable);
        CHECK(t2.holds());
        for (std::size_t s = 0; s < 4; ++s) {
            CHECK(std::abs(t2.deltas[s] - t1.deltas[s]) <= t2.tail_bound + 1e-9);
        }
    }
    SUBCASE("growing discrepancy budget") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Mdp m = random_mdp(seed, 4, 3, 2, 0.9);
            const Policy pi = random_policy(seed + 1, m);
            const int h = 3;
            std::vector<ChoiceFunction> seq;
            for (int t = 1; t <= h; ++t) {
                seq.push_back(make_ldcf(all_params(pi, h, std::min(t, h), h - 1, 3), 3));
            }
            std::mt19937_64 rng(seed);
            ValueVector u = policy_value(m, pi);
            for (double& x : u) {
                x += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
            }
            const auto r = check_theorem2(m, pi, seq, u, 180);
            REQUIRE(r.applicable);
            CHECK(r.holds());
        }
    }
    SUBCASE("broken subsumption is reported") {
        const Mdp m = random_mdp(2, 4, 3, 2, 0.9);
        const Policy pi = random_policy(3, m);
        const auto big = make_ldcf(all_params(pi, 3, 2, 2, 3), 3);
        const auto small = make_ldcf(all_params(pi, 3, 1, 2, 3), 3);
        const auto r = check_theorem2(m, pi, {big, small}, policy_value(m, pi), 50);
        CHECK_FALSE(r.applicable);
        CHECK(r.note.find("subsum") != std::string::npos);
    }
}

TEST_CASE("random instance generators") {
    const Mdp m = random_mdp(4, 5, 3, 2, 0.9);
    const Policy pi = random_policy(4, m);
    CHECK(pi == random_policy(4, m));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const RandomLdcf rl = random_ldcf(seed, m, pi, 4);
        CHECK(rl.horizon >= 1);
        CHECK(rl.horizon <= 4);
        CHECK(rl.max_discrepancies <= rl.horizon);
        CHECK(rl.max_depth < rl.horizon);
        CHECK(std::is_sorted(rl.widths.rbegin(), rl.widths.rend()));
        CHECK(rl.to_json() == random_ldcf(seed, m, pi, 4).to_json());
    }
    CHECK(all_policies(random_mdp(1, 2, 3, 1, 0.9)).size() == 9);
}

TEST_CASE("suites pass and are reproducible") {
    for (const auto& r : run_suite("all", 3, 20, Backup::kDiscounted)) {
        CHECK_MESSAGE(r.passed(), r.to_json());
    }
    const auto a = theorem1_suite(9, 10);
    const auto b = theorem1_suite(9, 10);
    CHECK(a.to_json() == b.to_json());
    CHECK_THROWS_AS(run_suite("nope", 0, 1, Backup::kDiscounted), std::invalid_argument);
}

TEST_CASE("lemma suite catches an undiscounted backup") {
    const auto r = lemma_suite(0, 50, Backup::kUndiscountedMutant);
    CHECK_FALSE(r.passed());
    CHECK(r.counterexample.has_value());
}

TEST_CASE("lemma suite with exact leaves has no negative margin") {
    const auto r = lemma_suite(5, 100);
    CHECK(r.passed());
    for (const auto& c : r.checks) {
        CHECK(c.violations == 0);
        CHECK(c.instances > 0);
    }
}
