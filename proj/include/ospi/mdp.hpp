#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ospi {

using State = int;
using Action = int;

/// Sorted, duplicate-free set of action ids. An empty set marks a leaf.
using ActionSet = std::vector<Action>;

/// State-indexed value vector (V, V^pi, u, ...).
using ValueVector = std::vector<double>;

/// Deterministic stationary policy: action_of[state].
using Policy = std::vector<Action>;

struct Transition {
    State next;
    double prob;
};

/**
Tabular discounted MDP with rewards on (state, action) pairs.

Transition rows are stored sparsely: only successors with strictly positive
probability are kept, sorted by next state. The object is immutable after
construction and validated on the way in.
*/
class Mdp {
public:
    Mdp(int num_states, int num_actions, double discount, std::vector<double> rewards,
        std::vector<std::vector<Transition>> transitions);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    double discount() const { return discount_; }

    double reward(State s, Action a) const { return rewards_[index(s, a)]; }
    std::span<const Transition> successors(State s, Action a) const { return rows_[index(s, a)]; }

    double reward_min() const { return reward_min_; }
    double reward_max() const { return reward_max_; }
    /// max |R(s,a)|
    double reward_abs_max() const;
    /// Largest number of positive-probability successors of any (s,a).
    int max_branching() const;

    bool valid_state(State s) const { return s >= 0 && s < num_states_; }
    bool valid_action(Action a) const { return a >= 0 && a < num_actions_; }

private:
    std::size_t index(State s, Action a) const {
        return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_) +
               static_cast<std::size_t>(a);
    }

    int num_states_;
    int num_actions_;
    double discount_;
    std::vector<double> rewards_;
    std::vector<std::vector<Transition>> rows_;
    double reward_min_ = 0.0;
    double reward_max_ = 0.0;
};

/// Throws std::invalid_argument unless pi has one valid action per state.
void validate_policy(const Mdp& mdp, const Policy& pi);

/// Exact V^pi by fixed-point sweeps. Throws std::runtime_error past max_iterations.
ValueVector policy_value(const Mdp& mdp, const Policy& pi, double tol = 1e-10,
                         long max_iterations = 1'000'000);

/// B[V](s) = max_a R(s,a) + gamma * sum_s' P(s'|s,a) V(s')
ValueVector bellman_backup(const Mdp& mdp, const ValueVector& v);

/// B_pi[V](s) = R(s,pi(s)) + gamma * sum_s' P(s'|s,pi(s)) V(s')
ValueVector policy_restricted_backup(const Mdp& mdp, const Policy& pi, const ValueVector& v);

/// Q(s,a) under a value vector, row-major by state.
double action_value(const Mdp& mdp, State s, Action a, const ValueVector& v);

/// Optimal values with ||B[V] - V|| <= tol.
ValueVector value_iteration(const Mdp& mdp, double tol = 1e-10, long max_iterations = 1'000'000);

/// Greedy policy with respect to v; ties go to the lowest action id.
Policy greedy_policy(const Mdp& mdp, const ValueVector& v);

/**
Seeded random MDP. Each (s,a) gets exactly `branching` distinct successors
with flat-Dirichlet probabilities; rewards are uniform in [0,1].
*/
Mdp random_mdp(std::uint64_t seed, int num_states, int num_actions, int branching,
               double discount);

/// max_s |a(s) - b(s)|; throws std::invalid_argument on length mismatch.
double max_norm_diff(const ValueVector& a, const ValueVector& b);

double max_norm(const ValueVector& v);

/// Load/store the JSON model format. Loading validates all invariants and
/// rejects reward-on-transition entries.
Mdp mdp_from_json_text(const std::string& text);
Mdp load_mdp(const std::string& path);
std::string mdp_to_json_text(const Mdp& mdp);

}  // namespace ospi
