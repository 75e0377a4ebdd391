#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ospi/choice.hpp"
#include "ospi/mdp.hpp"
#include "ospi/tree_eval.hpp"

namespace ospi {

/// Slack applied to every inequality checked by this module.
inline constexpr double kCheckTol = 1e-9;

struct SafetyReport {
    std::string check;
    bool applicable = true;   // false when a precondition failed; the bound is then not asserted
    std::string note;         // why the check is inapplicable or vacuous
    double epsilon = 0.0;     // ||u - V^pi||_inf (largest over policies for the corollary)
    int min_horizon = 0;
    double bound = 0.0;       // right-hand side, including any truncation tail
    double tail_bound = 0.0;
    double worst_violation = 0.0;  // max_s (lhs(s) - bound); <= kCheckTol means the check holds
    std::vector<double> deltas;    // per-state lhs(s)
    std::optional<StatePath> witness;  // failing path for a structural precondition

    bool holds() const { return !applicable || worst_violation <= kCheckTol; }
    std::string to_json() const;
};

/**
V^pi - V^pi' <= 2 eps gamma^h / (1 - gamma) with pi' the online policy of
(cf, u). Preconditions (pi-consistency, monotonicity) are checked over all
states; when either fails the report is marked inapplicable.
*/
SafetyReport check_theorem1(const Mdp& mdp, const Policy& pi, const ChoiceFunction& cf, const ValueVector& u,
                            std::size_t node_cap = kDefaultNodeCap);

/**
V^pi' >= max over consistent pi of (V^pi - 2 eps(u, pi) gamma^h / (1 - gamma)).
Policies that cf is not consistent with are skipped. An empty consistent set
passes vacuously and is noted.
*/
SafetyReport check_corollary1(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u,
                              const std::vector<Policy>& policies, std::size_t node_cap = kDefaultNodeCap);

/**
V^pi(s) - V_T(s) <= 2 eps gamma^h(psi_1) / (1 - gamma) + tail, where V_T is the
T-step return of the non-stationary online policy. A sequence shorter than T
is extended with its last element. Preconditions: every element monotonic
and pi-consistent, consecutive elements nested and agreeing on leaf paths.
*/
SafetyReport check_theorem2(const Mdp& mdp, const Policy& pi, std::vector<ChoiceFunction> seq, const ValueVector& u,
                            int horizon_steps, std::size_t node_cap = kDefaultNodeCap);

struct Fig1Instance {
    Mdp mdp;
    Policy pi;
    ChoiceFunction cf;
    State root = 0;
    double v_pi_root = 0.0;   // expected V^pi(A)
    double v_online_root = 0.0;  // expected V^pi'(A)
    std::vector<std::pair<Action, double>> root_q;  // expected (action, Q) at the root
    Action online_action = 0;
    StatePath monotonicity_witness;
};

/**
Five states A..E (ids 0..4), actions a..d (ids 0..3), gamma = 0.9.
The choice function is pi-consistent but not monotonic: the a-loop at the
root exposes a 600-reward transition from C that the root itself prunes,
so the online policy loops on A forever.
*/
Fig1Instance fig1_counterexample();

/// Parameters of a randomly drawn LDCF, kept so failing instances can be written out.
struct RandomLdcf {
    Policy pi;
    int horizon = 1;
    int max_discrepancies = 0;
    int max_depth = 0;
    std::vector<int> widths;                 // non-increasing
    std::vector<std::vector<Action>> order;  // per-state ranking of actions

    ChoiceFunction build(int num_actions) const;
    /// Same parameters with a different discrepancy limit.
    RandomLdcf with_k(int k) const;
    int max_width() const;
    std::string to_json() const;
};

/// Random depth-monotonic LDCF around pi with horizon in [1, max_horizon].
RandomLdcf random_ldcf(std::uint64_t seed, const Mdp& mdp, const Policy& pi, int max_horizon);

Policy random_policy(std::uint64_t seed, const Mdp& mdp);

/// Every deterministic policy of a small MDP, in lexicographic order.
std::vector<Policy> all_policies(const Mdp& mdp);

struct CheckTally {
    std::string name;
    long instances = 0;
    long violations = 0;
    long skipped = 0;
    double worst_margin = -1e300;  // max over instances of (lhs - rhs)
};

struct SuiteReport {
    std::string suite;
    std::uint64_t seed = 0;
    int trials = 0;
    std::vector<CheckTally> checks;
    std::optional<std::string> counterexample;  // JSON of the first failing instance

    long violations() const;
    bool passed() const { return violations() == 0; }
    std::string to_json() const;
};

/**
Randomized numeric checks of the lemmas and propositions behind the safety
results: value-vector lower bound (L1), depth monotonicity of V (L2), root
dominance (P1), leaf-perturbation contraction (L3, L5), one-step advantage
(L4), online policy value (P2), subsumption dominance (L6) and the LDCF leaf
count (P3). `backup` selects the tree backup so a mutated evaluator can be
shown to fail.
*/
SuiteReport lemma_suite(std::uint64_t seed, int trials, Backup backup = Backup::kDiscounted);

SuiteReport theorem1_suite(std::uint64_t seed, int trials, const std::vector<double>& epsilons = {0.0, 0.1, 1.0});
SuiteReport theorem2_suite(std::uint64_t seed, int trials);
SuiteReport corollary1_suite(std::uint64_t seed, int trials);
SuiteReport counterexample_suite();

/// "theorem1", "theorem2", "corollary1", "lemmas", "counterexample" or "all".
/// Throws std::invalid_argument for other names.
std::vector<SuiteReport> run_suite(const std::string& name, std::uint64_t seed, int trials,
                                   Backup backup = Backup::kDiscounted);

}  // namespace ospi
