#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ospi/mdp.hpp"

namespace ospi {

/// Base policy as a callable, so non-tabular domains can supply one too.
using BasePolicy = std::function<Action(State)>;

BasePolicy as_base_policy(Policy pi);

/**
Alternating state/action sequence p;s starting at a root state. A path with a
single state has length 0; length() counts actions.
*/
class StatePath {
public:
    StatePath() = default;
    explicit StatePath(State root) : states_{root} {}
    StatePath(std::vector<State> states, std::vector<Action> actions);

    std::size_t length() const { return actions_.size(); }
    bool empty() const { return states_.empty(); }
    State root() const { return states_.front(); }
    State last_state() const { return states_.back(); }
    const std::vector<State>& states() const { return states_; }
    const std::vector<Action>& actions() const { return actions_; }

    void push(Action a, State next) {
        actions_.push_back(a);
        states_.push_back(next);
    }
    void pop() {
        actions_.pop_back();
        states_.pop_back();
    }

    /// Path with the first state-action pair removed. Requires length() >= 1.
    StatePath drop_first() const;

    /// True when every transition has positive probability in mdp.
    bool feasible_in(const Mdp& mdp) const;

    /// "s0;a0;s1;..." with numeric ids.
    std::string to_string() const;

    friend bool operator==(const StatePath&, const StatePath&) = default;
    friend auto operator<=>(const StatePath&, const StatePath&) = default;

private:
    std::vector<State> states_;
    std::vector<Action> actions_;
};

/// Number of consecutive (s, a) pairs on the path with a != pi(s).
int discrepancy_count(const StatePath& path, const BasePolicy& pi);

/**
A choice function: state path -> allowed actions, with a declared horizon
bound. Evaluated lazily, one path at a time. Cheap to copy; copies share the
same rule, and same_as() compares that identity.
*/
class ChoiceFunction {
public:
    using Rule = std::function<ActionSet(const StatePath&)>;

    ChoiceFunction(std::string name, int num_actions, int horizon_bound, Rule rule,
                   BasePolicy base = {}, bool depth_and_discrepancy_only = false);

    /// Allowed actions at the path's last state. Throws std::out_of_range past the
    /// horizon bound and std::logic_error when the rule returns an invalid set.
    ActionSet choices(const StatePath& path) const;
    std::optional<ActionSet> try_choices(const StatePath& path) const;

    const std::string& name() const { return impl_->name; }
    int num_actions() const { return impl_->num_actions; }
    int horizon_bound() const { return impl_->horizon_bound; }
    /// The base policy for families built around one, empty otherwise.
    const BasePolicy& base_policy() const { return impl_->base; }
    bool has_base_policy() const { return static_cast<bool>(impl_->base); }
    /// True when choices depend only on (last state, depth, discrepancy count),
    /// which is what allows FSSS to merge nodes into a DAG.
    bool depth_and_discrepancy_only() const { return impl_->dag_mergeable; }

    bool same_as(const ChoiceFunction& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        std::string name;
        int num_actions;
        int horizon_bound;
        Rule rule;
        BasePolicy base;
        bool dag_mergeable;
    };
    std::shared_ptr<const Impl> impl_;
};

/// Discrepancy proposal Delta(s, d) for d in 0..max_depth.
struct DiscrepancyProposal {
    std::function<ActionSet(State, int)> propose;
    int max_depth = 0;

    ActionSet operator()(State s, int depth) const;
};

/// Delta(s, d) = A for every state and depth.
DiscrepancyProposal proposal_all(int num_actions, int max_depth);

/**
Delta(s, d) = the first widths[d] actions of order(s), skipping base(s).
A width schedule that never increases with depth gives a depth-monotonic
proposal. Depths past the end of `widths` reuse the last entry.
*/
DiscrepancyProposal proposal_ranked(std::function<std::vector<Action>(State)> order,
                                    std::vector<int> widths, BasePolicy base, int max_depth);

struct LdcfParams {
    BasePolicy base_policy;
    int horizon = 1;
    int max_discrepancies = 0;
    int max_discrepancy_depth = 0;
    DiscrepancyProposal proposal;
};

using RankFunction = std::function<double(const StatePath&, Action)>;

ChoiceFunction make_rollout(BasePolicy pi, int horizon, int num_actions);
ChoiceFunction make_lds(BasePolicy pi, int horizon, int max_discrepancies, int num_actions);
ChoiceFunction make_topk(RankFunction rank, int k, int horizon, BasePolicy pi, int num_actions,
                         bool force_consistent = true);
ChoiceFunction make_ldcf(const LdcfParams& theta, int num_actions);

/// Every action allowed until depth `horizon`.
ChoiceFunction make_full_expansion(int horizon, int num_actions);

/**
Base-policy tree with explicit per-path overrides: paths listed in `overrides`
get the given set, every other path of length < horizon gets {pi(s)}, and
paths of length horizon are leaves.
*/
ChoiceFunction make_explicit(BasePolicy pi, int horizon, int num_actions,
                             std::map<StatePath, ActionSet> overrides);

/**
Pseudo-random history-dependent choice function keyed by a hash of the path.
Paths shorter than min_leaf_depth always get a non-empty set; between
min_leaf_depth and horizon a path is a leaf with probability about 1/3.
Used to exercise lemmas that hold for arbitrary stationary choice functions.
*/
ChoiceFunction make_hashed(std::uint64_t seed, int num_actions, int min_leaf_depth, int horizon);

// ---------------------------------------------------------------------------
// Structural checks. Each enumerates psi-satisfying paths from the given roots
// and stops at node_cap paths, in which case the verdict is kInconclusive.

inline constexpr std::size_t kDefaultNodeCap = 1'000'000;

enum class Verdict { kHolds, kViolated, kInconclusive };

const char* to_string(Verdict v);

struct CheckResult {
    Verdict verdict = Verdict::kHolds;
    std::optional<StatePath> witness;
    std::size_t paths_visited = 0;

    bool holds() const { return verdict == Verdict::kHolds; }
    explicit operator bool() const { return holds(); }
};

class NodeCapExceeded : public std::runtime_error {
public:
    explicit NodeCapExceeded(std::size_t cap)
        : std::runtime_error("node cap of " + std::to_string(cap) + " exceeded") {}
};

std::vector<State> all_states(const Mdp& mdp);

/**
Depth-first walk over every psi-satisfying path from each root. The visitor
sees (path, choices at the path) and returns false to stop early. Returns
the number of paths visited; throws NodeCapExceeded past node_cap, and
std::logic_error if a path exceeds the declared horizon bound.
*/
std::size_t for_each_path(const ChoiceFunction& cf, const Mdp& mdp, const std::vector<State>& roots,
                          std::size_t node_cap,
                          const std::function<bool(const StatePath&, const ActionSet&)>& visit);

CheckResult is_pi_consistent(const ChoiceFunction& cf, const BasePolicy& pi, const Mdp& mdp,
                             const std::vector<State>& roots, std::size_t node_cap = kDefaultNodeCap);

CheckResult is_monotonic(const ChoiceFunction& cf, const Mdp& mdp, const std::vector<State>& roots,
                         std::size_t node_cap = kDefaultNodeCap);

/// a(p;s) contains b(p;s) on every b-satisfying path.
CheckResult subsumes(const ChoiceFunction& a, const ChoiceFunction& b, const Mdp& mdp,
                     const std::vector<State>& roots, std::size_t node_cap = kDefaultNodeCap);

/**
a and b agree on which paths are leaves: on every path satisfying either
choice function, a(p;s) is empty exactly when b(p;s) is.
*/
CheckResult same_leaf_paths(const ChoiceFunction& a, const ChoiceFunction& b, const Mdp& mdp,
                            const std::vector<State>& roots, std::size_t node_cap = kDefaultNodeCap);

/// The literal set of leaf paths (psi-satisfying paths with no choices).
std::set<StatePath> leaf_paths(const ChoiceFunction& cf, const Mdp& mdp, const std::vector<State>& roots,
                               std::size_t node_cap = kDefaultNodeCap);

struct Horizons {
    int min_horizon = 0;
    int max_horizon = 0;
};

/// (h(psi), H(psi)) over T^psi(root). Throws NodeCapExceeded past the cap.
Horizons horizons(const ChoiceFunction& cf, const Mdp& mdp, State root,
                  std::size_t node_cap = kDefaultNodeCap);
Horizons horizons(const ChoiceFunction& cf, const Mdp& mdp, const std::vector<State>& roots,
                  std::size_t node_cap = kDefaultNodeCap);

/// Delta(s, d) contains Delta(s, d+1) for all states and d in 0..max_depth-1.
bool is_depth_monotonic(const DiscrepancyProposal& prop, const Mdp& mdp, int max_depth);

bool is_subset(const ActionSet& small, const ActionSet& big);

}  // namespace ospi
