#include "ospi/choice.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ospi/seed.hpp"

namespace ospi {

namespace {

ActionSet all_actions(int num_actions) {
    ActionSet out(static_cast<std::size_t>(num_actions));
    std::iota(out.begin(), out.end(), 0);
    return out;
}

void insert_sorted(ActionSet& set, Action a) {
    auto it = std::lower_bound(set.begin(), set.end(), a);
    if (it == set.end() || *it != a) {
        set.insert(it, a);
    }
}

void require_policy(const BasePolicy& pi, const char* who) {
    if (!pi) {
        throw std::invalid_argument(std::string(who) + ": base policy is required");
    }
}

}  // namespace

BasePolicy as_base_policy(Policy pi) {
    auto shared = std::make_shared<const Policy>(std::move(pi));
    return [shared](State s) { return shared->at(static_cast<std::size_t>(s)); };
}

StatePath::StatePath(std::vector<State> states, std::vector<Action> actions)
    : states_(std::move(states)), actions_(std::move(actions)) {
    if (states_.size() != actions_.size() + 1) {
        throw std::invalid_argument("StatePath: need exactly one more state than actions");
    }
}

StatePath StatePath::drop_first() const {
    if (actions_.empty()) {
        throw std::logic_error("StatePath::drop_first on a zero-length path");
    }
    return StatePath(std::vector<State>(states_.begin() + 1, states_.end()),
                     std::vector<Action>(actions_.begin() + 1, actions_.end()));
}

bool StatePath::feasible_in(const Mdp& mdp) const {
    if (states_.empty() || !mdp.valid_state(states_.front())) {
        return false;
    }
    for (std::size_t i = 0; i < actions_.size(); ++i) {
        if (!mdp.valid_action(actions_[i]) || !mdp.valid_state(states_[i + 1])) {
            return false;
        }
        const auto row = mdp.successors(states_[i], actions_[i]);
        const bool reachable = std::any_of(row.begin(), row.end(), [&](const Transition& t) {
            return t.next == states_[i + 1] && t.prob > 0.0;
        });
        if (!reachable) {
            return false;
        }
    }
    return true;
}

std::string StatePath::to_string() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < states_.size(); ++i) {
        if (i > 0) {
            out << ';' << actions_[i - 1] << ';';
        }
        out << states_[i];
    }
    return out.str();
}

int discrepancy_count(const StatePath& path, const BasePolicy& pi) {
    int count = 0;
    const auto& states = path.states();
    const auto& actions = path.actions();
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (actions[i] != pi(states[i])) {
            ++count;
        }
    }
    return count;
}

ChoiceFunction::ChoiceFunction(std::string name, int num_actions, int horizon_bound, Rule rule,
                               BasePolicy base, bool depth_and_discrepancy_only) {
    if (num_actions <= 0) {
        throw std::invalid_argument("ChoiceFunction: num_actions must be positive");
    }
    if (horizon_bound < 0) {
        throw std::invalid_argument("ChoiceFunction: horizon bound must be non-negative");
    }
    if (!rule) {
        throw std::invalid_argument("ChoiceFunction: empty rule");
    }
    impl_ = std::make_shared<const Impl>(Impl{std::move(name), num_actions, horizon_bound,
                                              std::move(rule), std::move(base),
                                              depth_and_discrepancy_only});
}

std::optional<ActionSet> ChoiceFunction::try_choices(const StatePath& path) const {
    if (path.length() > static_cast<std::size_t>(impl_->horizon_bound)) {
        return std::nullopt;
    }
    return choices(path);
}

ActionSet ChoiceFunction::choices(const StatePath& path) const {
    if (path.empty()) {
        throw std::invalid_argument("choices: empty path");
    }
    if (path.length() > static_cast<std::size_t>(impl_->horizon_bound)) {
        throw std::out_of_range("choices: path " + path.to_string() + " is longer than the horizon bound " +
                                std::to_string(impl_->horizon_bound) + " of '" + impl_->name + "'");
    }
    ActionSet out = impl_->rule(path);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 0 || out[i] >= impl_->num_actions || (i > 0 && out[i - 1] >= out[i])) {
            throw std::logic_error("choice function '" + impl_->name +
                                   "' returned an invalid action set at " + path.to_string());
        }
    }
    if (!out.empty() && path.length() == static_cast<std::size_t>(impl_->horizon_bound)) {
        throw std::logic_error("choice function '" + impl_->name + "' extends past its horizon bound at " +
                               path.to_string());
    }
    return out;
}

ActionSet DiscrepancyProposal::operator()(State s, int depth) const {
    if (depth < 0 || depth > max_depth) {
        throw std::out_of_range("discrepancy proposal queried outside 0..D");
    }
    return propose(s, depth);
}

DiscrepancyProposal proposal_all(int num_actions, int max_depth) {
    ActionSet every = all_actions(num_actions);
    return {[every](State, int) { return every; }, max_depth};
}

DiscrepancyProposal proposal_ranked(std::function<std::vector<Action>(State)> order, std::vector<int> widths,
                                    BasePolicy base, int max_depth) {
    if (widths.empty()) {
        throw std::invalid_argument("proposal_ranked: empty width schedule");
    }
    if (std::any_of(widths.begin(), widths.end(), [](int w) { return w < 0; })) {
        throw std::invalid_argument("proposal_ranked: negative width");
    }
    require_policy(base, "proposal_ranked");
    auto propose = [order = std::move(order), widths = std::move(widths), base = std::move(base)](State s,
                                                                                                  int depth) {
        const int width = widths[std::min<std::size_t>(static_cast<std::size_t>(depth), widths.size() - 1)];
        const Action skip = base(s);
        ActionSet out;
        for (Action a : order(s)) {
            if (static_cast<int>(out.size()) >= width) {
                break;
            }
            if (a != skip) {
                out.push_back(a);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    return {std::move(propose), max_depth};
}

ChoiceFunction make_rollout(BasePolicy pi, int horizon, int num_actions) {
    if (horizon <= 0) {
        throw std::invalid_argument("make_rollout: horizon must be at least 1");
    }
    require_policy(pi, "make_rollout");
    ActionSet every = all_actions(num_actions);
    auto rule = [pi, horizon, every](const StatePath& p) -> ActionSet {
        const auto depth = static_cast<int>(p.length());
        if (depth == 0) {
            return every;
        }
        if (depth < horizon) {
            return {pi(p.last_state())};
        }
        return {};
    };
    return ChoiceFunction("rollout(H=" + std::to_string(horizon) + ")", num_actions, horizon, std::move(rule),
                          pi, true);
}

ChoiceFunction make_lds(BasePolicy pi, int horizon, int max_discrepancies, int num_actions) {
    if (horizon < 0 || max_discrepancies < 0) {
        throw std::invalid_argument("make_lds: negative parameter");
    }
    if (max_discrepancies > horizon) {
        throw std::invalid_argument("make_lds: K must not exceed H");
    }
    require_policy(pi, "make_lds");
    ActionSet every = all_actions(num_actions);
    auto rule = [pi, horizon, max_discrepancies, every](const StatePath& p) -> ActionSet {
        const auto depth = static_cast<int>(p.length());
        if (depth >= horizon) {
            return {};
        }
        if (discrepancy_count(p, pi) < max_discrepancies) {
            return every;
        }
        return {pi(p.last_state())};
    };
    return ChoiceFunction("lds(H=" + std::to_string(horizon) + ",K=" + std::to_string(max_discrepancies) + ")",
                          num_actions, horizon, std::move(rule), pi, true);
}

ChoiceFunction make_topk(RankFunction rank, int k, int horizon, BasePolicy pi, int num_actions,
                         bool force_consistent) {
    if (k <= 0) {
        throw std::invalid_argument("make_topk: k must be positive");
    }
    if (horizon < 0) {
        throw std::invalid_argument("make_topk: negative horizon");
    }
    if (!rank) {
        throw std::invalid_argument("make_topk: rank function is required");
    }
    if (force_consistent) {
        require_policy(pi, "make_topk");
    }
    const int keep = std::min(k, num_actions);
    auto rule = [rank, keep, horizon, pi, num_actions, force_consistent](const StatePath& p) -> ActionSet {
        if (static_cast<int>(p.length()) >= horizon) {
            return {};
        }
        std::vector<std::pair<double, Action>> scored;
        scored.reserve(static_cast<std::size_t>(num_actions));
        for (Action a = 0; a < num_actions; ++a) {
            scored.emplace_back(rank(p, a), a);
        }
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& x, const auto& y) { return x.first > y.first; });
        ActionSet out;
        for (int i = 0; i < keep; ++i) {
            out.push_back(scored[static_cast<std::size_t>(i)].second);
        }
        std::sort(out.begin(), out.end());
        if (force_consistent) {
            insert_sorted(out, pi(p.last_state()));
        }
        return out;
    };
    return ChoiceFunction("topk(k=" + std::to_string(k) + ",H=" + std::to_string(horizon) + ")", num_actions,
                          horizon, std::move(rule), pi, false);
}

ChoiceFunction make_ldcf(const LdcfParams& theta, int num_actions) {
    require_policy(theta.base_policy, "make_ldcf");
    if (theta.horizon < 1) {
        throw std::invalid_argument("make_ldcf: H must be at least 1");
    }
    if (theta.max_discrepancies < 0 || theta.max_discrepancies > theta.horizon) {
        throw std::invalid_argument("make_ldcf: need 0 <= K <= H");
    }
    if (theta.max_discrepancy_depth < 0 || theta.max_discrepancy_depth >= theta.horizon) {
        throw std::invalid_argument("make_ldcf: need 0 <= D < H");
    }
    if (!theta.proposal.propose) {
        throw std::invalid_argument("make_ldcf: discrepancy proposal is required");
    }
    if (theta.proposal.max_depth < theta.max_discrepancy_depth) {
        throw std::invalid_argument("make_ldcf: proposal is not defined up to depth D");
    }
    auto rule = [theta](const StatePath& p) -> ActionSet {
        const auto depth = static_cast<int>(p.length());
        if (depth >= theta.horizon) {
            return {};
        }
        const State s = p.last_state();
        const Action on_policy = theta.base_policy(s);
        if (depth <= theta.max_discrepancy_depth &&
            discrepancy_count(p, theta.base_policy) < theta.max_discrepancies) {
            ActionSet out = theta.proposal(s, depth);
            std::sort(out.begin(), out.end());
            out.erase(std::unique(out.begin(), out.end()), out.end());
            insert_sorted(out, on_policy);
            return out;
        }
        return {on_policy};
    };
    std::ostringstream name;
    name << "ldcf(H=" << theta.horizon << ",K=" << theta.max_discrepancies << ",D=" << theta.max_discrepancy_depth
         << ")";
    return ChoiceFunction(name.str(), num_actions, theta.horizon, std::move(rule), theta.base_policy, true);
}

ChoiceFunction make_full_expansion(int horizon, int num_actions) {
    if (horizon < 0) {
        throw std::invalid_argument("make_full_expansion: negative horizon");
    }
    ActionSet every = all_actions(num_actions);
    auto rule = [horizon, every](const StatePath& p) -> ActionSet {
        return static_cast<int>(p.length()) < horizon ? every : ActionSet{};
    };
    return ChoiceFunction("full(H=" + std::to_string(horizon) + ")", num_actions, horizon, std::move(rule), {},
                          true);
}

ChoiceFunction make_explicit(BasePolicy pi, int horizon, int num_actions, std::map<StatePath, ActionSet> overrides) {
    require_policy(pi, "make_explicit");
    if (horizon < 0) {
        throw std::invalid_argument("make_explicit: negative horizon");
    }
    for (auto& [path, set] : overrides) {
        if (path.empty() || path.length() >= static_cast<std::size_t>(horizon)) {
            throw std::invalid_argument("make_explicit: override path " + path.to_string() +
                                        " is not an internal depth");
        }
        std::sort(set.begin(), set.end());
        set.erase(std::unique(set.begin(), set.end()), set.end());
    }
    auto table = std::make_shared<const std::map<StatePath, ActionSet>>(std::move(overrides));
    auto rule = [pi, horizon, table](const StatePath& p) -> ActionSet {
        if (static_cast<int>(p.length()) >= horizon) {
            return {};
        }
        if (auto it = table->find(p); it != table->end()) {
            return it->second;
        }
        return {pi(p.last_state())};
    };
    return ChoiceFunction("explicit(H=" + std::to_string(horizon) + ")", num_actions, horizon, std::move(rule), pi,
                          false);
}

ChoiceFunction make_hashed(std::uint64_t seed, int num_actions, int min_leaf_depth, int horizon) {
    if (min_leaf_depth < 0 || min_leaf_depth > horizon) {
        throw std::invalid_argument("make_hashed: need 0 <= min_leaf_depth <= horizon");
    }
    if (num_actions > 62) {
        throw std::invalid_argument("make_hashed: at most 62 actions");
    }
    auto rule = [seed, num_actions, min_leaf_depth, horizon](const StatePath& p) -> ActionSet {
        const auto depth = static_cast<int>(p.length());
        if (depth >= horizon) {
            return {};
        }
        std::uint64_t h = mix64(seed);
        for (std::size_t i = 0; i < p.states().size(); ++i) {
            h = mix64(h ^ static_cast<std::uint64_t>(p.states()[i]));
            if (i < p.actions().size()) {
                h = mix64(h ^ (static_cast<std::uint64_t>(p.actions()[i]) << 32));
            }
        }
        if (depth >= min_leaf_depth && h % 3 == 0) {
            return {};
        }
        const std::uint64_t bits = mix64(h) & ((std::uint64_t{1} << num_actions) - 1);
        ActionSet out;
        for (Action a = 0; a < num_actions; ++a) {
            if (bits & (std::uint64_t{1} << a)) {
                out.push_back(a);
            }
        }
        if (out.empty()) {
            out.push_back(static_cast<Action>((h >> 7) % static_cast<std::uint64_t>(num_actions)));
        }
        return out;
    };
    return ChoiceFunction("hashed(seed=" + std::to_string(seed) + ")", num_actions, horizon, std::move(rule));
}

bool is_subset(const ActionSet& small, const ActionSet& big) {
    return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

}  // namespace ospi
