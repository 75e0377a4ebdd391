#include "ospi/tree_eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace ospi {

namespace {

void grow(const Mdp& mdp, const ChoiceFunction& cf, StatePath& path, int parent, Action via,
          std::vector<TreeNode>& nodes, std::size_t node_cap) {
    if (nodes.size() >= node_cap) {
        throw NodeCapExceeded(node_cap);
    }
    const int me = static_cast<int>(nodes.size());
    const State s = path.last_state();
    nodes.push_back(TreeNode{s, static_cast<int>(path.length()), parent, via, {}});
    const ActionSet allowed = cf.choices(path);
    std::vector<TreeEdge> edges;
    edges.reserve(allowed.size());
    for (Action a : allowed) {
        if (!mdp.valid_action(a)) {
            throw std::logic_error("choice function allows an action the MDP does not have");
        }
        TreeEdge edge{a, {}};
        for (const auto& t : mdp.successors(s, a)) {
            if (t.prob < kTreeZeroProb) {
                continue;
            }
            path.push(a, t.next);
            edge.children.emplace_back(t.prob, static_cast<int>(nodes.size()));
            grow(mdp, cf, path, me, a, nodes, node_cap);
            path.pop();
        }
        edges.push_back(std::move(edge));
    }
    nodes[static_cast<std::size_t>(me)].edges = std::move(edges);
}

}  // namespace

StatePath SearchTree::path_of(int i) const {
    std::vector<std::pair<Action, State>> steps;
    for (int n = i; nodes_[static_cast<std::size_t>(n)].parent >= 0; n = nodes_[static_cast<std::size_t>(n)].parent) {
        const auto& node = nodes_[static_cast<std::size_t>(n)];
        steps.emplace_back(node.via_action, node.state);
    }
    StatePath out = prefix_;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        out.push(it->first, it->second);
    }
    return out;
}

SearchTree build_tree(const Mdp& mdp, const ChoiceFunction& cf, const StatePath& prefix, std::size_t node_cap) {
    if (prefix.empty() || !mdp.valid_state(prefix.last_state())) {
        throw std::invalid_argument("build_tree: invalid root");
    }
    SearchTree tree;
    tree.prefix_ = prefix;
    StatePath path = prefix;
    // depth stored on nodes is the full path length, prefix included
    grow(mdp, cf, path, -1, -1, tree.nodes_, node_cap);
    return tree;
}

SearchTree build_tree(const Mdp& mdp, const ChoiceFunction& cf, State root, std::size_t node_cap) {
    return build_tree(mdp, cf, StatePath(root), node_cap);
}

std::vector<std::pair<Action, double>> EvalResult::root_q(const SearchTree& tree) const {
    std::vector<std::pair<Action, double>> out;
    const auto& root = tree.node(0);
    for (std::size_t e = 0; e < root.edges.size(); ++e) {
        out.emplace_back(root.edges[e].action, action_value[0][e]);
    }
    return out;
}

EvalResult evaluate_tree(const Mdp& mdp, const SearchTree& tree, const ValueVector& u, Backup backup) {
    if (u.size() != static_cast<std::size_t>(mdp.num_states())) {
        throw std::invalid_argument("evaluate: leaf values must have one entry per state");
    }
    const double gamma = backup == Backup::kDiscounted ? mdp.discount() : 1.0;
    EvalResult out;
    out.state_value.assign(tree.size(), 0.0);
    out.action_value.resize(tree.size());
    // preorder storage: iterating backwards visits children before parents
    for (std::size_t i = tree.size(); i-- > 0;) {
        const TreeNode& node = tree.node(static_cast<int>(i));
        if (node.is_leaf()) {
            out.state_value[i] = u[static_cast<std::size_t>(node.state)];
            continue;
        }
        auto& qs = out.action_value[i];
        qs.resize(node.edges.size());
        double best = 0.0;
        for (std::size_t e = 0; e < node.edges.size(); ++e) {
            const TreeEdge& edge = node.edges[e];
            double future = 0.0;
            for (const auto& [p, child] : edge.children) {
                future += p * out.state_value[static_cast<std::size_t>(child)];
            }
            qs[e] = mdp.reward(node.state, edge.action) + gamma * future;
            if (e == 0 || qs[e] > best) {
                best = qs[e];
            }
        }
        out.state_value[i] = best;
    }
    out.root_value = out.state_value.front();
    const auto& root = tree.node(0);
    if (!root.is_leaf()) {
        const auto& qs = out.action_value.front();
        const auto best = std::max_element(qs.begin(), qs.end());  // first maximum = lowest id
        out.root_best_action = root.edges[static_cast<std::size_t>(best - qs.begin())].action;
    }
    return out;
}

EvalResult evaluate(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u, State root,
                    std::size_t node_cap, Backup backup) {
    return evaluate_tree(mdp, build_tree(mdp, cf, root, node_cap), u, backup);
}

Action act(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u, State s, std::size_t node_cap) {
    const EvalResult r = evaluate(mdp, cf, u, s, node_cap);
    if (r.root_best_action < 0) {
        throw std::logic_error("act: choice function allows no action at state " + std::to_string(s));
    }
    return r.root_best_action;
}

ValueVector root_values(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u, std::size_t node_cap,
                        Backup backup) {
    ValueVector out(static_cast<std::size_t>(mdp.num_states()));
    for (State s = 0; s < mdp.num_states(); ++s) {
        out[static_cast<std::size_t>(s)] = evaluate(mdp, cf, u, s, node_cap, backup).root_value;
    }
    return out;
}

Policy online_policy(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u, std::size_t node_cap) {
    Policy pi(static_cast<std::size_t>(mdp.num_states()));
    for (State s = 0; s < mdp.num_states(); ++s) {
        pi[static_cast<std::size_t>(s)] = act(mdp, cf, u, s, node_cap);
    }
    return pi;
}

InducedPolicy induced_policy_value(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u, double tol,
                                   std::size_t node_cap) {
    InducedPolicy out;
    out.policy = online_policy(mdp, cf, u, node_cap);
    out.value = policy_value(mdp, out.policy, tol);
    return out;
}

std::map<StatePath, double> path_values(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u,
                                        const std::vector<State>& roots, std::size_t node_cap, Backup backup) {
    std::map<StatePath, double> out;
    for (State root : roots) {
        const SearchTree tree = build_tree(mdp, cf, root, node_cap);
        const EvalResult r = evaluate_tree(mdp, tree, u, backup);
        for (std::size_t i = 0; i < tree.size(); ++i) {
            out.emplace(tree.path_of(static_cast<int>(i)), r.state_value[i]);
        }
    }
    return out;
}

std::map<StatePath, double> depth_slice(const std::map<StatePath, double>& values, std::size_t k) {
    std::map<StatePath, double> out;
    for (const auto& [path, v] : values) {
        if (path.length() == k) {
            out.emplace(path, v);
        }
    }
    return out;
}

NonstationaryValue nonstationary_values(const Mdp& mdp, const std::vector<ChoiceFunction>& seq,
                                        const ValueVector& u, int horizon_steps, std::size_t node_cap) {
    if (horizon_steps < 0) {
        throw std::invalid_argument("nonstationary_value: negative step count");
    }
    if (seq.size() < static_cast<std::size_t>(horizon_steps)) {
        throw std::invalid_argument("nonstationary_value: sequence shorter than the step count");
    }
    const double gamma = mdp.discount();
    NonstationaryValue out;
    out.tail_bound = std::pow(gamma, horizon_steps) * mdp.reward_abs_max() / (1.0 - gamma);

    std::vector<Policy> policies(static_cast<std::size_t>(horizon_steps));
    for (int t = 0; t < horizon_steps; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        if (t > 0 && seq[ti].same_as(seq[ti - 1])) {
            policies[ti] = policies[ti - 1];
        } else {
            policies[ti] = online_policy(mdp, seq[ti], u, node_cap);
        }
    }
    // backward induction over the finite horizon
    ValueVector w(static_cast<std::size_t>(mdp.num_states()), 0.0);
    for (int t = horizon_steps - 1; t >= 0; --t) {
        w = policy_restricted_backup(mdp, policies[static_cast<std::size_t>(t)], w);
    }
    out.value = std::move(w);
    return out;
}

NonstationaryValue nonstationary_value(const Mdp& mdp, const std::vector<ChoiceFunction>& seq, const ValueVector& u,
                                       State start, int horizon_steps, std::size_t node_cap) {
    if (!mdp.valid_state(start)) {
        throw std::invalid_argument("nonstationary_value: start state out of range");
    }
    NonstationaryValue all = nonstationary_values(mdp, seq, u, horizon_steps, node_cap);
    return {ValueVector{all.value[static_cast<std::size_t>(start)]}, all.tail_bound};
}

std::size_t leaf_count(const SearchTree& tree) {
    return static_cast<std::size_t>(
        std::count_if(tree.nodes().begin(), tree.nodes().end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double ldcf_leaf_bound(int horizon, int max_discrepancies, int max_depth, int width, int branching) {
    const double cpow = std::pow(static_cast<double>(branching), horizon);
    const double base = static_cast<double>(max_depth + 1) * static_cast<double>(width);
    if (base == 1.0) {
        return 2.0 * cpow;
    }
    return (std::pow(base, max_discrepancies + 1) - 1.0) / (base - 1.0) * cpow;
}

std::string tree_to_json(const SearchTree& tree, const EvalResult& values) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < tree.size(); ++i) {
        const TreeNode& n = tree.node(static_cast<int>(i));
        nlohmann::json entry;
        entry["path"] = tree.path_of(static_cast<int>(i)).to_string();
        entry["state"] = n.state;
        entry["value"] = values.state_value[i];
        nlohmann::json actions = nlohmann::json::array();
        for (std::size_t e = 0; e < n.edges.size(); ++e) {
            actions.push_back({{"action", n.edges[e].action}, {"q", values.action_value[i][e]}});
        }
        entry["actions"] = std::move(actions);
        nodes.push_back(std::move(entry));
    }
    nlohmann::json doc;
    doc["root"] = tree.root_state();
    doc["best_action"] = values.root_best_action;
    doc["nodes"] = std::move(nodes);
    return doc.dump(2);
}

}  // namespace ospi
