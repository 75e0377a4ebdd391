// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ospi/experiment.hpp"
#include "ospi/fsss.hpp"
#include "ospi/safety.hpp"
#include "ospi/seed.hpp"
#include "ospi/tree_eval.hpp"

using namespace ospi;

namespace {

struct Result {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        if (ok) {
            detail = why;
        }
        ok = false;
    }
};

struct Instance {
    Mdp mdp;
    Policy pi;
    RandomLdcf ldcf;
};

// Random MDP with up to 8 states and 4 actions plus a depth-monotonic LDCF with H <= 4.
Instance random_instance(std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, {0xacce}));
    const int ns = std::uniform_int_distribution<int>(2, 8)(rng);
    const int na = std::uniform_int_distribution<int>(2, 4)(rng);
    const int branching = std::uniform_int_distribution<int>(1, std::min(3, ns))(rng);
    Mdp mdp = random_mdp(derive_seed(seed, {1}), ns, na, branching, 0.9);
    Policy pi = random_policy(derive_seed(seed, {2}), mdp);
    RandomLdcf ldcf = random_ldcf(derive_seed(seed, {3}), mdp, pi, 4);
    return {std::move(mdp), std::move(pi), std::move(ldcf)};
}

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

Result counterexample() {
    Result out;
    const auto fig = fig1_counterexample();
    const auto v_pi = policy_value(fig.mdp, fig.pi);
    const auto online = induced_policy_value(fig.mdp, fig.cf, v_pi);
    if (std::abs(fig.mdp.discount() - 0.9) > 0.0) {
        out.fail("discount is not 0.9");
    }
    if (std::abs(v_pi[0] - 10.0) > 1e-9) {
        out.fail("V^pi(A) = " + fmt_double(v_pi[0]));
    }
    if (std::abs(online.value[0] - 0.0) > 1e-9) {
        out.fail("V^pi'(A) = " + fmt_double(online.value[0]));
    }
    if (!is_pi_consistent(fig.cf, as_base_policy(fig.pi), fig.mdp, {fig.root}).holds()) {
        out.fail("choice function is not pi-consistent");
    }
    const auto mono = is_monotonic(fig.cf, fig.mdp, {fig.root});
    if (mono.verdict != Verdict::kViolated || !mono.witness || mono.witness->to_string() != "0;0;0;2;2") {
        out.fail("monotonicity check did not fail with witness 0;0;0;2;2");
    }
    out.detail = out.ok ? "V^pi(A)=" + fmt_double(v_pi[0]) + " V^pi'(A)=" + fmt_double(online.value[0]) : out.detail;
    return out;
}

Result theorem1_exact() {
    Result out;
    double worst = 1e300;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const Instance in = random_instance(seed);
        const auto cf = in.ldcf.build(in.mdp.num_actions());
        const auto roots = all_states(in.mdp);
        if (!is_pi_consistent(cf, as_base_policy(in.pi), in.mdp, roots).holds() ||
            !is_monotonic(cf, in.mdp, roots).holds()) {
            out.fail("preconditions failed at seed " + std::to_string(seed));
            continue;
        }
        const auto v_pi = policy_value(in.mdp, in.pi);
        const auto online = induced_policy_value(in.mdp, cf, v_pi);
        for (std::size_t s = 0; s < v_pi.size(); ++s) {
            const double diff = online.value[s] - v_pi[s];
            worst = std::min(worst, diff);
            if (diff < -1e-9) {
                out.fail("seed " + std::to_string(seed) + " state " + std::to_string(s) + ": " + fmt_double(diff));
            }
        }
    }
    if (out.ok) {
        out.detail = "500 instances, min(V^pi' - V^pi) = " + fmt_double(worst);
    }
    return out;
}

Result theorem1_noisy() {
    Result out;
    double worst = -1e300;
    long checked = 0;
    for (const double eps : {0.1, 1.0}) {
        for (std::uint64_t seed = 0; seed < 500; ++seed) {
            const Instance in = random_instance(seed);
            const auto cf = in.ldcf.build(in.mdp.num_actions());
            const auto v_pi = policy_value(in.mdp, in.pi);
            std::mt19937_64 rng(derive_seed(seed, {4, static_cast<std::uint64_t>(eps * 10)}));
            std::uniform_real_distribution<double> noise(-eps, eps);
            ValueVector u = v_pi;
            for (double& x : u) {
                x += noise(rng);
            }
            const double eps_actual = max_norm_diff(u, v_pi);
            const int h = horizons(cf, in.mdp, all_states(in.mdp)).min_horizon;
            const double gamma = in.mdp.discount();
            const double bound = 2.0 * eps_actual * std::pow(gamma, h) / (1.0 - gamma);
            const auto online = induced_policy_value(in.mdp, cf, u);
            for (std::size_t s = 0; s < v_pi.size(); ++s) {
                const double margin = v_pi[s] - online.value[s] - bound;
                worst = std::max(worst, margin);
                if (margin > 1e-9) {
                    out.fail("eps=" + fmt_double(eps) + " seed " + std::to_string(seed) + ": margin " +
                             fmt_double(margin));
                }
            }
            ++checked;
        }
    }
    if (out.ok) {
        out.detail = std::to_string(checked) + " instances, worst (lhs - bound) = " + fmt_double(worst);
    }
    return out;
}

Result lemmas() {
    Result out;
    const auto clean = lemma_suite(2024, 500);
    for (const auto& c : clean.checks) {
        if (c.violations > 0) {
            out.fail(c.name + ": " + std::to_string(c.violations) + " violations");
        }
        if (c.instances < 500) {
            out.fail(c.name + ": only " + std::to_string(c.instances) + " instances");
        }
    }
    const auto mutant = lemma_suite(2024, 500, Backup::kUndiscountedMutant);
    if (mutant.passed()) {
        out.fail("mutated backup was not detected");
    } else if (!mutant.counterexample) {
        out.fail("mutated backup detected without a counterexample");
    }
    if (out.ok) {
        out.detail = std::to_string(clean.checks.size()) + " checks clean; mutant caught with " +
                     std::to_string(mutant.violations()) + " violations";
    }
    return out;
}

Result rollout_equivalence() {
    Result out;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Instance in = random_instance(seed);
        const Mdp& m = in.mdp;
        const auto v = policy_value(m, in.pi);
        const auto cf = make_rollout(as_base_policy(in.pi), 1, m.num_actions());
        for (State s = 0; s < m.num_states(); ++s) {
            double best = -1e300;
            for (Action a = 0; a < m.num_actions(); ++a) {
                best = std::max(best, action_value(m, s, a, v));
            }
            const Action chosen = act(m, cf, v, s);
            if (action_value(m, s, chosen, v) < best - 1e-9) {
                out.fail("seed " + std::to_string(seed) + " state " + std::to_string(s));
            }
        }
    }
    if (out.ok) {
        out.detail = "100 MDPs, every state";
    }
    return out;
}

Result value_iteration_degeneracy() {
    Result out;
    double worst = 0.0;
    for (int h = 1; h <= 3; ++h) {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const Instance in = random_instance(seed + 1000 * static_cast<std::uint64_t>(h));
            const Mdp& m = in.mdp;
            std::mt19937_64 rng(seed);
            ValueVector u(static_cast<std::size_t>(m.num_states()));
            for (double& x : u) {
                x = std::uniform_real_distribution<double>(-10.0, 10.0)(rng);
            }
            LdcfParams p{as_base_policy(in.pi), h, h, h - 1, proposal_all(m.num_actions(), h - 1)};
            const auto roots = root_values(m, make_ldcf(p, m.num_actions()), u);
            ValueVector v = u;
            for (int i = 0; i < h; ++i) {
                v = bellman_backup(m, v);
            }
            const double d = max_norm_diff(roots, v);
            worst = std::max(worst, d);
            if (d > 1e-9) {
                out.fail("H=" + std::to_string(h) + " seed " + std::to_string(seed) + ": " + fmt_double(d));
            }
        }
    }
    if (out.ok) {
        out.detail = "H in {1,2,3}, max deviation " + fmt_double(worst);
    }
    return out;
}

Result leaf_bound() {
    Result out;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(derive_seed(seed, {7}));
        const int branching = std::uniform_int_distribution<int>(1, 3)(rng);
        const Mdp m = random_mdp(derive_seed(seed, {8}), 6, 3, branching, 0.9);
        const Policy pi = random_policy(derive_seed(seed, {9}), m);
        const RandomLdcf rl = random_ldcf(derive_seed(seed, {10}), m, pi, 4);
        const auto tree = build_tree(m, rl.build(3), 0);
        const double bound = ldcf_leaf_bound(rl.horizon, rl.max_discrepancies, rl.max_depth, rl.max_width(), branching);
        if (static_cast<double>(leaf_count(tree)) > bound) {
            out.fail("seed " + std::to_string(seed) + ": " + std::to_string(leaf_count(tree)) + " leaves > " +
                     fmt_double(bound));
        }
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Mdp det = random_mdp(derive_seed(seed, {11}), 6, 3, 1, 0.9);
        const Policy pi = random_policy(seed, det);
        LdcfParams p{as_base_policy(pi), 4, 4, 0,
                     proposal_ranked([](State) { return std::vector<Action>{0, 1, 2}; }, {1}, as_base_policy(pi), 0)};
        const auto n = leaf_count(build_tree(det, make_ldcf(p, 3), 0));
        if (n > 2) {
            out.fail("(D+1)W=1 case has " + std::to_string(n) + " leaves");
        }
    }
    if (out.ok) {
        out.detail = "100 random LDCFs + 20 single-width deterministic cases";
    }
    return out;
}

Result fsss_exactness() {
    Result out;
    long trials_checked = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(derive_seed(seed, {12}));
        const int ns = std::uniform_int_distribution<int>(2, 8)(rng);
        const int na = std::uniform_int_distribution<int>(2, 4)(rng);
        const Mdp m = random_mdp(derive_seed(seed, {13}), ns, na, 1, 0.9);
        const Policy pi = random_policy(derive_seed(seed, {14}), m);
        const auto cf = random_ldcf(derive_seed(seed, {15}), m, pi, 4).build(na);
        const auto u = policy_value(m, pi);
        const MdpSimulator sim(m);
        FsssOptions o;
        o.width = 1;
        o.budget = Budget{1'000'000, 100'000'000};
        o.merge_dag = seed % 2 == 1;
        const State root = static_cast<State>(seed % static_cast<std::uint64_t>(ns));
        const auto exact = evaluate(m, cf, u, root);

        const auto decision = fsss_act(sim, cf, leaf_from_vector(u), root, o, seed);
        if (decision.action != exact.root_best_action) {
            out.fail("seed " + std::to_string(seed) + ": action " + std::to_string(decision.action) + " vs " +
                     std::to_string(exact.root_best_action));
        }

        // trial-by-trial invariants, run to exhaustion
        FsssPlanner p(sim, cf, leaf_from_vector(u), root, o, seed);
        std::vector<std::pair<double, double>> prev;
        bool more = true;
        while (more) {
            more = p.run_trial();
            ++trials_checked;
            FsssPlanner frozen = p;
            frozen.expand_all();
            const auto values = frozen.exact_values();
            const auto& nodes = p.nodes();
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                const auto& n = nodes[i];
                if (n.lower > n.upper + 1e-9) {
                    out.fail("seed " + std::to_string(seed) + ": lower > upper");
                }
                if ((n.expanded || n.leaf) && (values[i] < n.lower - 1e-9 || values[i] > n.upper + 1e-9)) {
                    out.fail("seed " + std::to_string(seed) + ": bounds exclude the sampled-tree value");
                }
                if (i < prev.size() && (n.lower < prev[i].first - 1e-9 || n.upper > prev[i].second + 1e-9)) {
                    out.fail("seed " + std::to_string(seed) + ": bounds moved outward at node " + std::to_string(i) +
                             " [" + fmt_double(prev[i].first) + ", " + fmt_double(prev[i].second) + "] -> [" +
                             fmt_double(n.lower) + ", " + fmt_double(n.upper) + "]");
                }
            }
            prev.clear();
            for (const auto& n : nodes) {
                prev.emplace_back(n.lower, n.upper);
            }
        }
        if (std::abs(p.root().lower - exact.root_value) > 1e-9 || std::abs(p.root().upper - exact.root_value) > 1e-9) {
            out.fail("seed " + std::to_string(seed) + ": root bounds [" + fmt_double(p.root().lower) + ", " +
                     fmt_double(p.root().upper) + "] vs " + fmt_double(exact.root_value));
        }
    }
    if (out.ok) {
        out.detail = "100 instances, " + std::to_string(trials_checked) + " trials checked";
    }
    return out;
}

Result theorem2() {
    Result out;
    double worst = -1e300;
    const double eps_cycle[] = {0.0, 0.1, 1.0};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Instance in = random_instance(seed + 5000);
        const Mdp& m = in.mdp;
        const int h = in.ldcf.horizon;
        std::vector<ChoiceFunction> seq;
        for (int t = 1; t <= h; ++t) {
            seq.push_back(in.ldcf.with_k(std::min(t, h)).build(m.num_actions()));
        }
        const double gamma = m.discount();
        const double rmax = std::max(std::abs(m.reward_min()), std::abs(m.reward_max()));
        int steps = 0;
        while (std::pow(gamma, steps) * rmax / (1.0 - gamma) >= 1e-6) {
            ++steps;
        }
        const double eps = eps_cycle[seed % 3];
        ValueVector u = policy_value(m, in.pi);
        std::mt19937_64 rng(derive_seed(seed, {16}));
        for (double& x : u) {
            x += std::uniform_real_distribution<double>(-eps, eps)(rng);
        }
        const auto r = check_theorem2(m, in.pi, seq, u, steps);
        if (!r.applicable) {
            out.fail("seed " + std::to_string(seed) + ": " + r.note);
            continue;
        }
        if (r.tail_bound >= 1e-6) {
            out.fail("seed " + std::to_string(seed) + ": tail bound too large");
        }
        worst = std::max(worst, r.worst_violation);
        if (!r.holds()) {
            out.fail("seed " + std::to_string(seed) + ": violation " + fmt_double(r.worst_violation));
        }
    }
    if (out.ok) {
        out.detail = "100 sequences, worst (lhs - bound) = " + fmt_double(worst);
    }
    return out;
}

std::string strip_time(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::string out;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() > 7) {
            cells[7].clear();
        }
        for (const auto& c : cells) {
            out += c + ",";
        }
        out += "\n";
    }
    return out;
}

Result desk_experiment() {
    Result out;
    const auto exact_cfg = ExperimentConfig::load(OSPI_SOURCE_DIR "/configs/gol2x2_exact.json");
    double worst = 1e300;
    for (const auto& r : run_sweep(exact_cfg)) {
        worst = std::min(worst, r.normalized_reward);
        if (!r.is_base() && r.normalized_reward < 1.0 - 1e-6) {
            out.fail("2x2 config " + std::to_string(r.config_id) + ": " + fmt_double(r.normalized_reward));
        }
    }

    const auto mc_cfg = ExperimentConfig::load(OSPI_SOURCE_DIR "/configs/gol3x3_mc.json");
    if (mc_cfg.episodes != 30 || mc_cfg.steps != 20) {
        out.fail("3x3 config is not 30 episodes x 20 steps");
    }
    const auto rows = run_sweep(mc_cfg);
    const auto again = run_sweep(mc_cfg);
    if (strip_time(sweep_csv(rows)) != strip_time(sweep_csv(again))) {
        out.fail("3x3 sweep CSV differs between identical runs");
    }
    double best_lower = -1e300;
    int best_id = -1;
    for (const auto& r : rows) {
        if (!r.is_base() && r.normalized_reward - r.ci_halfwidth > best_lower) {
            best_lower = r.normalized_reward - r.ci_halfwidth;
            best_id = r.config_id;
        }
    }
    if (best_lower < 0.9) {
        out.fail("best 3x3 lower confidence bound " + fmt_double(best_lower));
    }
    if (out.ok) {
        out.detail = "2x2 min normalized " + fmt_double(worst) + "; 3x3 best config " + std::to_string(best_id) +
                     " lower bound " + fmt_double(best_lower);
    }
    return out;
}

}  // namespace

int main() {
    init_logging();
    struct Criterion {
        const char* name;
        std::function<Result()> run;
        double limit_s;
    };
    const std::vector<Criterion> criteria = {
        {"counterexample regression", counterexample, 1.0},
        {"theorem 1, exact leaves", theorem1_exact, 120.0},
        {"theorem 1, noisy leaves", theorem1_noisy, 0.0},
        {"lemma suite and mutant", lemmas, 0.0},
        {"rollout policy improvement", rollout_equivalence, 0.0},
        {"value-iteration degeneracy", value_iteration_degeneracy, 0.0},
        {"leaf-count bound", leaf_bound, 0.0},
        {"fsss exactness", fsss_exactness, 0.0},
        {"theorem 2, growing budget", theorem2, 0.0},
        {"game-of-life sweeps", desk_experiment, 600.0},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Result o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (criteria[i].limit_s > 0.0 && secs > criteria[i].limit_s) {
            o.fail("took " + fmt_double(secs) + " s, limit " + fmt_double(criteria[i].limit_s) + " s");
        }
        if (!o.ok) {
            ++failures;
        }
        std::printf("%s  %2zu  %-28s  %7.2fs  %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].name, secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
