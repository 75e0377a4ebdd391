#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ospi/choice.hpp"

namespace ospi {

namespace {

// Threshold below which a transition is treated as impossible when walking trees.
constexpr double kZeroProb = 1e-15;

bool walk(const ChoiceFunction& cf, const Mdp& mdp, StatePath& path, std::size_t node_cap, std::size_t& visited,
          const std::function<bool(const StatePath&, const ActionSet&)>& visit) {
    if (++visited > node_cap) {
        throw NodeCapExceeded(node_cap);
    }
    const ActionSet allowed = cf.choices(path);
    if (!visit(path, allowed)) {
        return false;
    }
    const State s = path.last_state();
    for (Action a : allowed) {
        if (!mdp.valid_action(a)) {
            throw std::logic_error("choice function allows an action the MDP does not have");
        }
        for (const auto& t : mdp.successors(s, a)) {
            if (t.prob < kZeroProb) {
                continue;
            }
            path.push(a, t.next);
            const bool go_on = walk(cf, mdp, path, node_cap, visited, visit);
            path.pop();
            if (!go_on) {
                return false;
            }
        }
    }
    return true;
}

template <typename Body>
CheckResult run_check(Body body) {
    CheckResult result;
    try {
        body(result);
    } catch (const NodeCapExceeded&) {
        result.verdict = Verdict::kInconclusive;
    }
    return result;
}

}  // namespace

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::kHolds:
            return "holds";
        case Verdict::kViolated:
            return "violated";
        case Verdict::kInconclusive:
            return "inconclusive: cap";
    }
    return "?";
}

std::vector<State> all_states(const Mdp& mdp) {
    std::vector<State> out(static_cast<std::size_t>(mdp.num_states()));
    std::iota(out.begin(), out.end(), 0);
    return out;
}

std::size_t for_each_path(const ChoiceFunction& cf, const Mdp& mdp, const std::vector<State>& roots,
                          std::size_t node_cap,
                          const std::function<bool(const StatePath&, const ActionSet&)>& visit) {
    std::size_t visited = 0;
    for (State root : roots) {
        if (!mdp.valid_state(root)) {
            throw std::invalid_argument("root state out of range");
        }
        StatePath path(root);
        if (!walk(cf, mdp, path, node_cap, visited, visit)) {
            break;
        }
    }
    return visited;
}

CheckResult is_pi_consistent(const ChoiceFunction& cf, const BasePolicy& pi, const Mdp& mdp,
                             const std::vector<State>& roots, std::size_t node_cap) {
    return run_check([&](CheckResult& r) {
        r.paths_visited = for_each_path(cf, mdp, roots, node_cap, [&](const StatePath& p, const ActionSet& allowed) {
            if (allowed.empty() || std::binary_search(allowed.begin(), allowed.end(), pi(p.last_state()))) {
                return true;
            }
            r.verdict = Verdict::kViolated;
            r.witness = p;
            return false;
        });
    });
}

CheckResult is_monotonic(const ChoiceFunction& cf, const Mdp& mdp, const std::vector<State>& roots,
                         std::size_t node_cap) {
    return run_check([&](CheckResult& r) {
        r.paths_visited = for_each_path(cf, mdp, roots, node_cap, [&](const StatePath& p, const ActionSet& allowed) {
            if (p.length() == 0) {
                return true;
            }
            if (is_subset(allowed, cf.choices(p.drop_first()))) {
                return true;
            }
            r.verdict = Verdict::kViolated;
            r.witness = p;
            return false;
        });
    });
}

CheckResult subsumes(const ChoiceFunction& a, const ChoiceFunction& b, const Mdp& mdp,
                     const std::vector<State>& roots, std::size_t node_cap) {
    return run_check([&](CheckResult& r) {
        r.paths_visited = for_each_path(b, mdp, roots, node_cap, [&](const StatePath& p, const ActionSet& allowed) {
            const auto bigger = a.try_choices(p);
            if (bigger && is_subset(allowed, *bigger)) {
                return true;
            }
            r.verdict = Verdict::kViolated;
            r.witness = p;
            return false;
        });
    });
}

CheckResult same_leaf_paths(const ChoiceFunction& a, const ChoiceFunction& b, const Mdp& mdp,
                            const std::vector<State>& roots, std::size_t node_cap) {
    return run_check([&](CheckResult& r) {
        auto agree_with = [&](const ChoiceFunction& other) {
            return [&](const StatePath& p, const ActionSet& allowed) {
                const auto theirs = other.try_choices(p);
                if (theirs && theirs->empty() == allowed.empty()) {
                    return true;
                }
                r.verdict = Verdict::kViolated;
                r.witness = p;
                return false;
            };
        };
        r.paths_visited = for_each_path(a, mdp, roots, node_cap, agree_with(b));
        if (r.verdict == Verdict::kHolds) {
            r.paths_visited += for_each_path(b, mdp, roots, node_cap, agree_with(a));
        }
    });
}

std::set<StatePath> leaf_paths(const ChoiceFunction& cf, const Mdp& mdp, const std::vector<State>& roots,
                               std::size_t node_cap) {
    std::set<StatePath> out;
    for_each_path(cf, mdp, roots, node_cap, [&](const StatePath& p, const ActionSet& allowed) {
        if (allowed.empty()) {
            out.insert(p);
        }
        return true;
    });
    return out;
}

Horizons horizons(const ChoiceFunction& cf, const Mdp& mdp, const std::vector<State>& roots,
                  std::size_t node_cap) {
    if (roots.empty()) {
        throw std::invalid_argument("horizons: no root states");
    }
    Horizons h{std::numeric_limits<int>::max(), 0};
    for_each_path(cf, mdp, roots, node_cap, [&](const StatePath& p, const ActionSet& allowed) {
        if (allowed.empty()) {
            const auto depth = static_cast<int>(p.length());
            h.min_horizon = std::min(h.min_horizon, depth);
            h.max_horizon = std::max(h.max_horizon, depth);
        }
        return true;
    });
    if (h.min_horizon == std::numeric_limits<int>::max()) {
        // every branch dead-ends in zero-probability transitions; cannot happen for a valid Mdp
        throw std::logic_error("horizons: tree has no leaves");
    }
    return h;
}

Horizons horizons(const ChoiceFunction& cf, const Mdp& mdp, State root, std::size_t node_cap) {
    return horizons(cf, mdp, std::vector<State>{root}, node_cap);
}

bool is_depth_monotonic(const DiscrepancyProposal& prop, const Mdp& mdp, int max_depth) {
    for (State s = 0; s < mdp.num_states(); ++s) {
        for (int d = 0; d < max_depth; ++d) {
            ActionSet shallow = prop(s, d);
            ActionSet deep = prop(s, d + 1);
            std::sort(shallow.begin(), shallow.end());
            std::sort(deep.begin(), deep.end());
            if (!is_subset(deep, shallow)) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace ospi
