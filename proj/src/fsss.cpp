#include "ospi/fsss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace ospi {

namespace {

constexpr double kClosedGap = 1e-12;

double gap(const FsssNode& n) { return n.upper - n.lower; }
double gap(const FsssActionNode& a) { return a.upper - a.lower; }

}  // namespace

MdpSimulator::MdpSimulator(std::shared_ptr<const Mdp> mdp) : mdp_(std::move(mdp)) {
    if (!mdp_) {
        throw std::invalid_argument("MdpSimulator: null model");
    }
}

Outcome MdpSimulator::sample(State s, Action a, Rng& rng) const {
    const auto row = mdp_->successors(s, a);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double draw = unit(rng);
    double acc = 0.0;
    for (const auto& t : row) {
        acc += t.prob;
        if (draw < acc) {
            return {t.next, mdp_->reward(s, a)};
        }
    }
    return {row.back().next, mdp_->reward(s, a)};
}

LeafEvaluator leaf_from_vector(ValueVector u) {
    auto shared = std::make_shared<const ValueVector>(std::move(u));
    return [shared](State s) { return shared->at(static_cast<std::size_t>(s)); };
}

DagKey ldcf_dag_key(const StatePath& path, const BasePolicy& pi) {
    return DagKey{path.last_state(), static_cast<int>(path.length()), discrepancy_count(path, pi)};
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::kPruned:
            return "pruned";
        case Termination::kClosed:
            return "closed";
        case Termination::kBudget:
            return "budget";
        case Termination::kNoExpansion:
            return "no-expansion";
    }
    return "?";
}

std::string FsssDiagnostics::to_json() const {
    nlohmann::json doc;
    doc["trials"] = trials;
    doc["sim_calls"] = sim_calls;
    doc["nodes"] = nodes;
    doc["termination"] = to_string(termination);
    doc["fallback"] = fallback;
    nlohmann::json rb = nlohmann::json::array();
    for (const auto& r : root) {
        rb.push_back({{"action", r.action}, {"lower", r.lower}, {"upper", r.upper}});
    }
    doc["root_bounds"] = std::move(rb);
    return doc.dump();
}

FsssPlanner::FsssPlanner(const Simulator& sim, ChoiceFunction cf, LeafEvaluator u, State root, FsssOptions options,
                         std::uint64_t seed)
    : sim_(sim), cf_(std::move(cf)), u_(std::move(u)), options_(options), rng_(seed) {
    if (options_.width < 1) {
        throw std::invalid_argument("fsss: sampling width C must be at least 1");
    }
    if (options_.budget.max_trials <= 0 || options_.budget.max_sim_calls <= 0) {
        throw std::invalid_argument("fsss: budget must be positive");
    }
    if (!u_) {
        throw std::invalid_argument("fsss: leaf evaluator is required");
    }
    if (cf_.num_actions() != sim_.num_actions()) {
        throw std::invalid_argument("fsss: choice function and simulator disagree on the action count");
    }
    if (options_.merge_dag && !(cf_.depth_and_discrepancy_only() && cf_.has_base_policy())) {
        throw std::invalid_argument("fsss: DAG merging needs an LDCF-style choice function with a base policy");
    }
    const double gamma = sim_.discount();
    init_lower_ = sim_.reward_min() / (1.0 - gamma);
    init_upper_ = sim_.reward_max() / (1.0 - gamma);
    if (options_.leaf_value_range) {
        init_lower_ = std::min(init_lower_, options_.leaf_value_range->first);
        init_upper_ = std::max(init_upper_, options_.leaf_value_range->second);
    }
    FsssNode r;
    r.path = StatePath(root);
    r.lower = init_lower_;
    r.upper = init_upper_;
    nodes_.push_back(std::move(r));
    if (options_.merge_dag) {
        dag_index_.emplace(DagKey{root, 0, 0}, 0);
    }
}

int FsssPlanner::child_node(int parent, Action a, State next) {
    const FsssNode& p = nodes_[static_cast<std::size_t>(parent)];
    const int disc = p.discrepancies + (cf_.has_base_policy() && a != cf_.base_policy()(p.state()) ? 1 : 0);
    if (options_.merge_dag) {
        const DagKey key{next, p.depth() + 1, disc};
        if (auto it = dag_index_.find(key); it != dag_index_.end()) {
            return it->second;
        }
        dag_index_.emplace(key, static_cast<int>(nodes_.size()));
    }
    FsssNode child;
    child.path = p.path;
    child.path.push(a, next);
    child.discrepancies = disc;
    child.lower = init_lower_;
    child.upper = init_upper_;
    nodes_.push_back(std::move(child));
    return static_cast<int>(nodes_.size()) - 1;
}

bool FsssPlanner::expand(int node) {
    auto idx = static_cast<std::size_t>(node);
    if (nodes_[idx].expanded) {
        return true;
    }
    const ActionSet allowed = cf_.choices(nodes_[idx].path);
    if (allowed.empty()) {
        FsssNode& n = nodes_[idx];
        n.expanded = true;
        n.leaf = true;
        n.leaf_value = u_(n.state());
        n.lower = n.upper = n.leaf_value;
        return true;
    }
    const long needed = static_cast<long>(allowed.size()) * options_.width;
    if (sim_calls_ + needed > options_.budget.max_sim_calls ||
        nodes_.size() + static_cast<std::size_t>(needed) > options_.node_cap) {
        out_of_budget_ = true;
        return false;
    }
    const State s = nodes_[idx].state();
    std::vector<FsssActionNode> actions;
    actions.reserve(allowed.size());
    for (Action a : allowed) {
        std::vector<Outcome> draws;
        draws.reserve(static_cast<std::size_t>(options_.width));
        for (int i = 0; i < options_.width; ++i) {
            draws.push_back(sim_.sample(s, a, rng_));
        }
        sim_calls_ += options_.width;
        // duplicate draws collapse into one child with a larger weight
        std::sort(draws.begin(), draws.end(), [](const Outcome& x, const Outcome& y) {
            return std::tie(x.next, x.reward) < std::tie(y.next, y.reward);
        });
        FsssActionNode an{a, {}, init_lower_, init_upper_};
        for (std::size_t i = 0; i < draws.size();) {
            std::size_t j = i;
            while (j < draws.size() && draws[j].next == draws[i].next && draws[j].reward == draws[i].reward) {
                ++j;
            }
            const int child = child_node(node, a, draws[i].next);
            an.children.push_back({static_cast<double>(j - i) / options_.width, draws[i].reward, child});
            i = j;
        }
        actions.push_back(std::move(an));
    }
    // child_node may have reallocated nodes_
    FsssNode& n = nodes_[idx];
    n.actions = std::move(actions);
    n.expanded = true;
    update(node);
    return true;
}

void FsssPlanner::update(int node) {
    FsssNode& n = nodes_[static_cast<std::size_t>(node)];
    if (n.leaf || !n.expanded) {
        return;
    }
    const double gamma = sim_.discount();
    double lo = -std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (auto& an : n.actions) {
        double l = 0.0;
        double h = 0.0;
        for (const auto& c : an.children) {
            const FsssNode& child = nodes_[static_cast<std::size_t>(c.node)];
            l += c.weight * (c.reward + gamma * child.lower);
            h += c.weight * (c.reward + gamma * child.upper);
        }
        an.lower = std::max(an.lower, l);
        an.upper = std::min(an.upper, h);
        if (an.upper < an.lower) {
            an.upper = an.lower;  // rounding only
        }
        lo = std::max(lo, an.lower);
        hi = std::max(hi, an.upper);
    }
    n.lower = std::max(n.lower, lo);
    n.upper = std::min(n.upper, hi);
    if (n.upper < n.lower) {
        n.upper = n.lower;
    }
}

bool FsssPlanner::run_trial() {
    if (trials_ >= options_.budget.max_trials) {
        out_of_budget_ = true;
        return false;
    }
    if (!expand(0)) {
        return false;
    }
    if (gap(nodes_.front()) <= kClosedGap) {
        return false;
    }
    std::vector<int> visited{0};
    int current = 0;
    while (true) {
        FsssNode& n = nodes_[static_cast<std::size_t>(current)];
        ++n.visits;
        if (n.leaf) {
            break;
        }
        // action with the largest upper bound; among ties prefer one that is still open
        std::size_t pick = 0;
        for (std::size_t i = 1; i < n.actions.size(); ++i) {
            const auto& cand = n.actions[i];
            const auto& best = n.actions[pick];
            if (cand.upper > best.upper ||
                (cand.upper == best.upper && gap(best) <= kClosedGap && gap(cand) > kClosedGap)) {
                pick = i;
            }
        }
        const FsssActionNode& an = n.actions[pick];
        int next = -1;
        double widest = kClosedGap;
        for (const auto& c : an.children) {
            const double g = gap(nodes_[static_cast<std::size_t>(c.node)]);
            const double score = options_.child_selection == ChildSelection::kWeightedGap ? c.weight * g : g;
            if (g > kClosedGap && (next < 0 || score > widest)) {
                widest = score;
                next = c.node;
            }
        }
        if (next < 0) {
            break;
        }
        if (!expand(next)) {
            break;
        }
        visited.push_back(next);
        current = next;
    }
    for (auto it = visited.rbegin(); it != visited.rend(); ++it) {
        update(*it);
    }
    ++trials_;
    return !out_of_budget_ && gap(nodes_.front()) > kClosedGap;
}

std::optional<Action> FsssPlanner::decided_action() const {
    const FsssNode& r = root();
    if (!r.expanded || r.leaf) {
        return std::nullopt;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.actions.size(); ++i) {
        if (r.actions[i].lower > r.actions[best].lower) {
            best = i;
        }
    }
    const double bar = r.actions[best].lower;
    for (std::size_t i = 0; i < r.actions.size(); ++i) {
        if (i == best) {
            continue;
        }
        const double up = r.actions[i].upper;
        if ((i < best && up >= bar) || (i > best && up > bar)) {
            return std::nullopt;
        }
    }
    return r.actions[best].action;
}

FsssDecision FsssPlanner::plan() {
    FsssDecision out;
    std::optional<Action> decided = decided_action();
    while (!decided && trials_ < options_.budget.max_trials) {
        if (!run_trial()) {
            break;
        }
        decided = decided_action();
    }

    const FsssNode& r = root();
    out.diagnostics.trials = trials_;
    out.diagnostics.sim_calls = sim_calls_;
    out.diagnostics.nodes = nodes_.size();
    if (!r.expanded) {
        ActionSet allowed = cf_.choices(r.path);
        if (allowed.empty()) {
            throw std::logic_error("fsss: choice function allows no action at the root");
        }
        out.diagnostics.termination = Termination::kNoExpansion;
        out.diagnostics.fallback = true;
        out.action = cf_.has_base_policy() ? cf_.base_policy()(r.state()) : allowed.front();
        out.lower = r.lower;
        out.upper = r.upper;
        return out;
    }
    if (r.leaf) {
        throw std::logic_error("fsss: choice function allows no action at the root");
    }
    for (const auto& an : r.actions) {
        out.diagnostics.root.push_back({an.action, an.lower, an.upper});
    }
    if (decided) {
        out.action = *decided;
        const bool all_closed =
            std::all_of(r.actions.begin(), r.actions.end(), [](const FsssActionNode& a) { return gap(a) <= kClosedGap; });
        out.diagnostics.termination = all_closed ? Termination::kClosed : Termination::kPruned;
    } else {
        std::size_t best = 0;
        for (std::size_t i = 1; i < r.actions.size(); ++i) {
            if (r.actions[i].lower > r.actions[best].lower) {
                best = i;
            }
        }
        out.action = r.actions[best].action;
        out.diagnostics.termination = Termination::kBudget;
    }
    out.lower = r.lower;
    out.upper = r.upper;
    return out;
}

void FsssPlanner::expand_all() {
    const auto saved = options_.budget;
    const auto saved_cap = options_.node_cap;
    options_.budget.max_sim_calls = std::numeric_limits<long>::max() / 2;
    options_.node_cap = std::numeric_limits<std::size_t>::max() / 2;
    // nodes_ grows while we scan; new nodes are picked up by the index loop
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        expand(static_cast<int>(i));
    }
    // settle bounds bottom-up: deepest nodes first
    std::vector<int> order(nodes_.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = static_cast<int>(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return nodes_[static_cast<std::size_t>(x)].depth() > nodes_[static_cast<std::size_t>(y)].depth();
    });
    for (int i : order) {
        update(i);
    }
    options_.budget = saved;
    options_.node_cap = saved_cap;
}

std::vector<double> FsssPlanner::exact_values() const {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> value(nodes_.size(), nan);
    std::vector<char> done(nodes_.size(), 0);
    const double gamma = sim_.discount();
    std::function<double(int)> solve = [&](int i) -> double {
        const auto idx = static_cast<std::size_t>(i);
        if (done[idx]) {
            return value[idx];
        }
        const FsssNode& n = nodes_[idx];
        double v = nan;
        if (n.leaf) {
            v = n.leaf_value;
        } else if (n.expanded) {
            v = -std::numeric_limits<double>::infinity();
            for (const auto& an : n.actions) {
                double q = 0.0;
                for (const auto& c : an.children) {
                    q += c.weight * (c.reward + gamma * solve(c.node));
                }
                if (std::isnan(q)) {
                    v = nan;
                    break;
                }
                v = std::max(v, q);
            }
        }
        value[idx] = v;
        done[idx] = 1;
        return v;
    };
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        solve(static_cast<int>(i));
    }
    return value;
}

double FsssPlanner::unfolded_value(int node, StatePath& path) const {
    const FsssNode& n = nodes_[static_cast<std::size_t>(node)];
    if (!n.expanded) {
        throw std::logic_error("unfolded_root_value: sampled graph is not fully expanded");
    }
    const ActionSet allowed = cf_.choices(path);
    if (n.leaf) {
        if (!allowed.empty()) {
            throw std::logic_error("merged node is a leaf on one path but not on " + path.to_string());
        }
        return u_(n.state());
    }
    if (allowed.size() != n.actions.size()) {
        throw std::logic_error("merged node has different choices on path " + path.to_string());
    }
    const double gamma = sim_.discount();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n.actions.size(); ++i) {
        const auto& an = n.actions[i];
        if (an.action != allowed[i]) {
            throw std::logic_error("merged node has different choices on path " + path.to_string());
        }
        double q = 0.0;
        for (const auto& c : an.children) {
            path.push(an.action, nodes_[static_cast<std::size_t>(c.node)].state());
            q += c.weight * (c.reward + gamma * unfolded_value(c.node, path));
            path.pop();
        }
        best = std::max(best, q);
    }
    return best;
}

double FsssPlanner::unfolded_root_value() const {
    StatePath path = root().path;
    return unfolded_value(0, path);
}

FsssDecision fsss_act(const Simulator& sim, const ChoiceFunction& cf, const LeafEvaluator& u, State root,
                      const FsssOptions& options, std::uint64_t seed) {
    FsssPlanner planner(sim, cf, u, root, options, seed);
    return planner.plan();
}

}  // namespace ospi
