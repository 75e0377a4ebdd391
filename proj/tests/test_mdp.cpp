#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "ospi/mdp.hpp"
#include "ospi/safety.hpp"

using namespace ospi;

namespace {

Mdp self_loop(double reward, double gamma) { return Mdp(1, 1, gamma, {reward}, {{{0, 1.0}}}); }

std::vector<Policy> enumerate_policies(const Mdp& mdp) { return all_policies(mdp); }

}  // namespace

TEST_CASE("policy_value: geometric series on a self-loop") {
    const Mdp m = self_loop(1.0, 0.9);
    CHECK(policy_value(m, {0})[0] == doctest::Approx(10.0).epsilon(1e-10));
}

TEST_CASE("policy_value: counter-example base policy is worth 10 at A") {
    const auto fig = fig1_counterexample();
    CHECK(std::abs(policy_value(fig.mdp, fig.pi)[0] - 10.0) <= 1e-9);
}

TEST_CASE("policy_value matches 10000 Jacobi sweeps on a seeded MDP") {
    const Mdp m = random_mdp(7, 6, 3, 3, 0.9);
    const Policy pi = random_policy(99, m);
    const auto ours = policy_value(m, pi);
    const auto ref = oracle::sweep_policy_value(m, pi, 10'000);
    CHECK(max_norm_diff(ours, ref) <= 1e-9);
}

TEST_CASE("policy_value residual is within tolerance") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Mdp m = random_mdp(seed, 5, 3, 2, 0.95);
        const Policy pi = random_policy(seed + 100, m);
        const auto v = policy_value(m, pi, 1e-10);
        CHECK(max_norm_diff(policy_restricted_backup(m, pi, v), v) <= 1e-10);
    }
}

TEST_CASE("bellman_backup") {
    SUBCASE("zero vector gives the best immediate reward") {
        const Mdp m = random_mdp(3, 4, 3, 2, 0.9);
        const auto b = bellman_backup(m, ValueVector(4, 0.0));
        for (State s = 0; s < 4; ++s) {
            double best = m.reward(s, 0);
            for (Action a = 1; a < 3; ++a) {
                best = std::max(best, m.reward(s, a));
            }
            CHECK(b[static_cast<std::size_t>(s)] == best);
        }
    }
    SUBCASE("single state, rewards 0 and 5") {
        const Mdp m(1, 2, 0.9, {0.0, 5.0}, {{{0, 1.0}}, {{0, 1.0}}});
        CHECK(bellman_backup(m, {0.0})[0] == 5.0);
    }
    SUBCASE("V* is a fixed point") {
        const Mdp m = random_mdp(11, 6, 3, 3, 0.9);
        const auto vstar = oracle::sweep_optimal_value(m, 2000);
        CHECK(max_norm_diff(bellman_backup(m, vstar), vstar) <= 1e-9);
    }
}

TEST_CASE("policy_restricted_backup") {
    const Mdp m = random_mdp(5, 5, 3, 2, 0.9);
    const Policy pi = random_policy(6, m);
    const auto v_pi = policy_value(m, pi);
    CHECK(max_norm_diff(policy_restricted_backup(m, pi, v_pi), v_pi) <= 1e-9);
    const auto r = policy_restricted_backup(m, pi, ValueVector(5, 0.0));
    for (State s = 0; s < 5; ++s) {
        CHECK(r[static_cast<std::size_t>(s)] == m.reward(s, pi[static_cast<std::size_t>(s)]));
    }
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        ValueVector v(5);
        for (double& x : v) {
            x = d(rng);
        }
        const auto restricted = policy_restricted_backup(m, pi, v);
        const auto full = bellman_backup(m, v);
        for (std::size_t s = 0; s < 5; ++s) {
            CHECK(restricted[s] <= full[s]);
        }
    }
}

TEST_CASE("value_iteration") {
    CHECK(value_iteration(self_loop(1.0, 0.5))[0] == doctest::Approx(2.0).epsilon(1e-10));

    // 0 -> 1 with reward 1, 1 -> 1 with reward 2: V(1) = 2 / (1 - g), V(0) = 1 + g V(1)
    const double g = 0.8;
    const Mdp chain = oracle::deterministic_mdp({{1}, {1}}, {{1.0}, {2.0}}, g);
    const auto v = value_iteration(chain, 1e-12);
    CHECK(std::abs(v[1] - 2.0 / (1.0 - g)) <= 1e-9);
    CHECK(std::abs(v[0] - (1.0 + g * 2.0 / (1.0 - g))) <= 1e-9);

    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Mdp m = random_mdp(seed, 3, 2, 2, 0.9);
        const double tol = 1e-10;
        const auto vstar = value_iteration(m, tol);
        for (const Policy& pi : enumerate_policies(m)) {
            const auto v_pi = policy_value(m, pi);
            for (std::size_t s = 0; s < 3; ++s) {
                CHECK(vstar[s] >= v_pi[s] - 1e-8);
            }
        }
    }
}

TEST_CASE("random_mdp") {
    const Mdp a = random_mdp(1, 4, 2, 2, 0.9);
    const Mdp b = random_mdp(1, 4, 2, 2, 0.9);
    CHECK(mdp_to_json_text(a) == mdp_to_json_text(b));

    const Mdp det = random_mdp(2, 5, 3, 1, 0.9);
    for (State s = 0; s < 5; ++s) {
        for (Action x = 0; x < 3; ++x) {
            REQUIRE(det.successors(s, x).size() == 1);
            CHECK(det.successors(s, x)[0].prob == 1.0);
        }
    }

    const Mdp m = random_mdp(3, 6, 3, 3, 0.9);
    for (State s = 0; s < 6; ++s) {
        for (Action x = 0; x < 3; ++x) {
            double sum = 0.0;
            CHECK(m.successors(s, x).size() == 3);
            for (const auto& t : m.successors(s, x)) {
                sum += t.prob;
                CHECK(t.prob > 0.0);
                CHECK(t.prob <= 1.0);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
            CHECK(m.reward(s, x) >= 0.0);
            CHECK(m.reward(s, x) <= 1.0);
        }
    }

    CHECK_THROWS_AS(random_mdp(1, 3, 2, 4, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(random_mdp(1, 0, 2, 1, 0.9), std::invalid_argument);
}

TEST_CASE("max_norm_diff") {
    CHECK(max_norm_diff({1.0, 2.0}, {1.0, 2.0}) == 0.0);
    CHECK(max_norm_diff({1.0, 2.0}, {0.0, 5.0}) == 3.0);
    CHECK_THROWS_AS(max_norm_diff({1.0}, {1.0, 2.0}), std::invalid_argument);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> d;
    for (int i = 0; i < 100; ++i) {
        ValueVector a(7);
        ValueVector b(7);
        double brute = 0.0;
        for (std::size_t k = 0; k < 7; ++k) {
            a[k] = d(rng);
            b[k] = d(rng);
            brute = std::max(brute, std::abs(a[k] - b[k]));
        }
        CHECK(max_norm_diff(a, b) == brute);
    }
}

TEST_CASE("model validation") {
    CHECK_THROWS_AS(Mdp(1, 1, 1.0, {1.0}, {{{0, 1.0}}}), std::invalid_argument);
    CHECK_THROWS_AS(Mdp(1, 1, 0.9, {1.0}, {{{0, 0.5}}}), std::invalid_argument);
    CHECK_THROWS_AS(Mdp(2, 1, 0.9, {1.0, 0.0}, {{{0, 1.0}}, {{2, 1.0}}}), std::invalid_argument);
    CHECK_THROWS_AS(Mdp(1, 1, 0.9, {std::nan("")}, {{{0, 1.0}}}), std::invalid_argument);
    CHECK_THROWS_AS(validate_policy(self_loop(1.0, 0.9), {1}), std::invalid_argument);
}

TEST_CASE("json round trip and loader checks") {
    const Mdp m = random_mdp(9, 4, 2, 2, 0.9);
    const Mdp back = mdp_from_json_text(mdp_to_json_text(m));
    CHECK(mdp_to_json_text(back) == mdp_to_json_text(m));

    const Mdp strings = mdp_from_json_text(R"({"num_states": 1, "num_actions": 1, "discount": "0.9",
        "rewards": [["1.5"]], "transitions": [[[[0, "1.0"]]]]})");
    CHECK(strings.reward(0, 0) == 1.5);
    CHECK(strings.discount() == 0.9);

    CHECK_THROWS_AS(mdp_from_json_text(R"({"num_states": 1, "num_actions": 1, "discount": 0.9,
        "rewards": [[0]], "transitions": [[[[0, 1.0, 3.0]]]]})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(mdp_from_json_text("{"), std::invalid_argument);
    CHECK_THROWS_AS(mdp_from_json_text(R"({"num_states": 1})"), std::invalid_argument);
}

TEST_CASE("property: value-vector lower bound on V^pi") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> d(-10.0, 10.0);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Mdp m = random_mdp(seed, 4, 3, 2, 0.9);
        const Policy pi = random_policy(seed * 7 + 1, m);
        ValueVector v(4);
        for (double& x : v) {
            x = d(rng);
        }
        const auto bv = policy_restricted_backup(m, pi, v);
        double delta = 0.0;
        for (std::size_t s = 0; s < 4; ++s) {
            delta = std::max(delta, v[s] - bv[s]);
        }
        const auto v_pi = policy_value(m, pi);
        for (std::size_t s = 0; s < 4; ++s) {
            CHECK(v[s] - v_pi[s] <= delta / (1.0 - m.discount()) + 1e-9);
        }
    }
}

TEST_CASE("property: bellman_backup is monotone") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> d(-5.0, 5.0);
    std::uniform_real_distribution<double> bump(0.0, 2.0);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Mdp m = random_mdp(seed, 5, 3, 3, 0.9);
        ValueVector v(5);
        ValueVector w(5);
        for (std::size_t s = 0; s < 5; ++s) {
            v[s] = d(rng);
            w[s] = v[s] + bump(rng);
        }
        const auto bv = bellman_backup(m, v);
        const auto bw = bellman_backup(m, w);
        for (std::size_t s = 0; s < 5; ++s) {
            CHECK(bv[s] <= bw[s]);
        }
    }
}
