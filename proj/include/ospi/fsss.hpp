#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "ospi/choice.hpp"
#include "ospi/simulator.hpp"

namespace ospi {

/// Leaf evaluation function u: S -> R.
using LeafEvaluator = std::function<double(State)>;

LeafEvaluator leaf_from_vector(ValueVector u);

struct Budget {
    long max_trials = 10'000;
    long max_sim_calls = 10'000'000;
};

enum class ChildSelection { kWeightedGap, kUnweightedGap };

struct FsssOptions {
    int width = 1;  // C: sampled successors per action node
    Budget budget;
    /// Merge nodes with equal (state, depth, discrepancies). Only valid for
    /// choice functions with depth_and_discrepancy_only().
    bool merge_dag = false;
    ChildSelection child_selection = ChildSelection::kWeightedGap;
    /// Widens the initial bounds when leaf values may fall outside
    /// [R_min/(1-gamma), R_max/(1-gamma)].
    std::optional<std::pair<double, double>> leaf_value_range;
    std::size_t node_cap = 2'000'000;
};

/// DAG identity of an LDCF node: choices agree for paths with equal keys.
struct DagKey {
    State state;
    int depth;
    int discrepancies;

    friend auto operator<=>(const DagKey&, const DagKey&) = default;
};

DagKey ldcf_dag_key(const StatePath& path, const BasePolicy& pi);

struct FsssChild {
    double weight;  // fraction of the C draws that produced this outcome
    double reward;
    int node;
};

struct FsssActionNode {
    Action action;
    std::vector<FsssChild> children;
    double lower;
    double upper;
};

struct FsssNode {
    StatePath path;  // first path that reached the node
    int discrepancies = 0;
    double lower = 0.0;
    double upper = 0.0;
    bool expanded = false;
    bool leaf = false;
    double leaf_value = 0.0;
    long visits = 0;
    std::vector<FsssActionNode> actions;

    State state() const { return path.last_state(); }
    int depth() const { return static_cast<int>(path.length()); }
};

enum class Termination { kPruned, kClosed, kBudget, kNoExpansion };

const char* to_string(Termination t);

struct RootActionBounds {
    Action action;
    double lower;
    double upper;
};

struct FsssDiagnostics {
    long trials = 0;
    long sim_calls = 0;
    std::size_t nodes = 0;
    Termination termination = Termination::kBudget;
    bool fallback = false;
    std::vector<RootActionBounds> root;

    std::string to_json() const;
};

struct FsssDecision {
    Action action = -1;
    double lower = 0.0;
    double upper = 0.0;
    FsssDiagnostics diagnostics;
};

/**
Forward Search Sparse Sampling over the tree T^psi(root).

Each trial walks one root-to-leaf path: at a state node it takes the allowed
action with the largest upper bound, at an action node the sampled child with
the largest (weighted) bound gap. Nodes are expanded on first visit by drawing
C successors for every allowed action. Bounds are backed up along the path
and only ever tighten.
*/
class FsssPlanner {
public:
    FsssPlanner(const Simulator& sim, ChoiceFunction cf, LeafEvaluator u, State root, FsssOptions options,
                std::uint64_t seed);

    /// One trial. Returns false when no further progress is possible: the
    /// budget is spent, the root cannot be expanded, or the root bounds have met.
    bool run_trial();

    /// The action the termination rule commits to, if it fires: the
    /// lowest-id action whose lower bound beats every other action's upper
    /// bound (strictly for lower ids).
    std::optional<Action> decided_action() const;

    /// Trials until the termination rule fires or the budget runs out.
    FsssDecision plan();

    const std::vector<FsssNode>& nodes() const { return nodes_; }
    const FsssNode& root() const { return nodes_.front(); }
    long trials() const { return trials_; }
    long sim_calls() const { return sim_calls_; }

    /// Expands every reachable node, ignoring the budget. Sampled successor
    /// sets of nodes that are already expanded are kept.
    void expand_all();

    /// Exact values of the frozen sampled graph; NaN for unexpanded nodes and
    /// anything depending on them.
    std::vector<double> exact_values() const;

    /// Value of the root computed on the sampled graph unfolded into a tree,
    /// querying the choice function on each actual path. Throws
    /// std::logic_error if a merged node's choices differ along some path.
    double unfolded_root_value() const;

private:
    bool expand(int node);
    void update(int node);
    int child_node(int parent, Action a, State next);
    double unfolded_value(int node, StatePath& path) const;

    const Simulator& sim_;
    ChoiceFunction cf_;
    LeafEvaluator u_;
    FsssOptions options_;
    Rng rng_;
    double init_lower_;
    double init_upper_;
    std::vector<FsssNode> nodes_;
    std::map<DagKey, int> dag_index_;
    long trials_ = 0;
    long sim_calls_ = 0;
    bool out_of_budget_ = false;
};

/// Runs FsssPlanner::plan once. Falls back to a policy-consistent action when
/// the budget does not even allow expanding the root.
FsssDecision fsss_act(const Simulator& sim, const ChoiceFunction& cf, const LeafEvaluator& u, State root,
                      const FsssOptions& options, std::uint64_t seed);

}  // namespace ospi
