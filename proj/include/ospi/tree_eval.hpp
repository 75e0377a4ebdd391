#pragma once

#include <map>
#include <string>
#include <vector>

#include "ospi/choice.hpp"
#include "ospi/mdp.hpp"

namespace ospi {

/// Children of one action node: (probability, child state-node index).
struct TreeEdge {
    Action action;
    std::vector<std::pair<double, int>> children;
};

struct TreeNode {
    State state;
    int depth;
    int parent;          // -1 at the root
    Action via_action;   // action leading here, -1 at the root
    std::vector<TreeEdge> edges;  // one per allowed action, ascending id; empty at leaves

    bool is_leaf() const { return edges.empty(); }
};

/**
The materialized tree T^psi(root): exactly the psi-satisfying paths from the
root, with every positive-probability successor under each allowed action.
Nodes are stored in depth-first preorder, so children always follow parents.
*/
class SearchTree {
public:
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return nodes_.size(); }
    State root_state() const { return nodes_.front().state; }
    /// The root path prefix the tree was grown from (length 0 for an ordinary root).
    const StatePath& prefix() const { return prefix_; }

    /// Full path of a node, including the prefix.
    StatePath path_of(int i) const;

private:
    friend SearchTree build_tree(const Mdp&, const ChoiceFunction&, const StatePath&, std::size_t);
    StatePath prefix_;
    std::vector<TreeNode> nodes_;
};

/// Transition probabilities below this are not materialized.
inline constexpr double kTreeZeroProb = 1e-15;

SearchTree build_tree(const Mdp& mdp, const ChoiceFunction& cf, State root,
                      std::size_t node_cap = kDefaultNodeCap);
/// Subtree of T^psi below an arbitrary path (the path itself is the subtree root).
SearchTree build_tree(const Mdp& mdp, const ChoiceFunction& cf, const StatePath& prefix,
                      std::size_t node_cap = kDefaultNodeCap);

/// Backup rule used by the evaluator. The undiscounted variant is a deliberate
/// mutant used to confirm the verification suite catches a broken backup.
enum class Backup { kDiscounted, kUndiscountedMutant };

struct EvalResult {
    std::vector<double> state_value;               // V per node
    std::vector<std::vector<double>> action_value;  // Q per node, parallel to node.edges
    Action root_best_action = -1;                  // -1 when the root is a leaf
    double root_value = 0.0;

    /// (action, Q) pairs at the root, ascending action id.
    std::vector<std::pair<Action, double>> root_q(const SearchTree& tree) const;
};

EvalResult evaluate_tree(const Mdp& mdp, const SearchTree& tree, const ValueVector& u,
                         Backup backup = Backup::kDiscounted);

EvalResult evaluate(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u, State root,
                    std::size_t node_cap = kDefaultNodeCap, Backup backup = Backup::kDiscounted);

/// Pi^psi_u(s): argmax of root Q over psi(s), ties to the lowest id. Throws
/// std::logic_error when psi(s) is empty.
Action act(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u, State s,
           std::size_t node_cap = kDefaultNodeCap);

/// V^psi_{u,0}: the root value of T^psi(s) for every state s.
ValueVector root_values(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u,
                        std::size_t node_cap = kDefaultNodeCap, Backup backup = Backup::kDiscounted);

/// Pi^psi_u at every state.
Policy online_policy(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u,
                     std::size_t node_cap = kDefaultNodeCap);

struct InducedPolicy {
    Policy policy;
    ValueVector value;
};

InducedPolicy induced_policy_value(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u,
                                   double tol = 1e-10, std::size_t node_cap = kDefaultNodeCap);

/**
V^psi_u for every node of T^psi(s) over all roots, keyed by the node's path.
Depth-k slices V^psi_{u,k} are the entries whose path has length k.
*/
std::map<StatePath, double> path_values(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u,
                                        const std::vector<State>& roots, std::size_t node_cap = kDefaultNodeCap,
                                        Backup backup = Backup::kDiscounted);

/// Entries of path_values with path length k.
std::map<StatePath, double> depth_slice(const std::map<StatePath, double>& values, std::size_t k);

struct NonstationaryValue {
    ValueVector value;       // T-step expected return from each start state
    double tail_bound = 0.0;  // gamma^T * max|R| / (1 - gamma)
};

/**
Exact T-step expected return of the non-stationary online policy that acts
with Pi^{seq[t]}_u at environment step t (0-based). Requires seq.size() >= T
when T > 0. Consecutive entries that are the same choice function share one
policy computation.
*/
NonstationaryValue nonstationary_values(const Mdp& mdp, const std::vector<ChoiceFunction>& seq,
                                        const ValueVector& u, int horizon_steps,
                                        std::size_t node_cap = kDefaultNodeCap);

NonstationaryValue nonstationary_value(const Mdp& mdp, const std::vector<ChoiceFunction>& seq,
                                       const ValueVector& u, State start, int horizon_steps,
                                       std::size_t node_cap = kDefaultNodeCap);

std::size_t leaf_count(const SearchTree& tree);

/**
Leaf-count bound for an LDCF tree: 2 C^H when (D+1)W == 1, otherwise
(((D+1)W)^(K+1) - 1) / ((D+1)W - 1) * C^H.
*/
double ldcf_leaf_bound(int horizon, int max_discrepancies, int max_depth, int width, int branching);

/// JSON dump of paths, allowed actions and V/Q values.
std::string tree_to_json(const SearchTree& tree, const EvalResult& values);

}  // namespace ospi
