#include "ospi/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace ospi {

namespace {

constexpr double kRowSumTolerance = 1e-12;

std::string where(State s, Action a) {
    return "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")";
}

// Iterates v <- op(v) until the fixed-point residual is below tol * (1 - gamma),
// which keeps the distance to the true fixed point below tol.
template <typename Op>
ValueVector iterate_to_fixed_point(const Mdp& mdp, Op op, double tol, long max_iterations,
                                   const char* what) {
    ValueVector v(static_cast<std::size_t>(mdp.num_states()), 0.0);
    const double stop = tol * (1.0 - mdp.discount());
    for (long it = 0; it < max_iterations; ++it) {
        ValueVector next = op(v);
        const double residual = max_norm_diff(next, v);
        v = std::move(next);
        if (residual <= stop) {
            return v;
        }
    }
    throw std::runtime_error(std::string(what) + ": no convergence within " +
                             std::to_string(max_iterations) + " iterations");
}

}  // namespace

Mdp::Mdp(int num_states, int num_actions, double discount, std::vector<double> rewards,
         std::vector<std::vector<Transition>> transitions)
    : num_states_(num_states),
      num_actions_(num_actions),
      discount_(discount),
      rewards_(std::move(rewards)),
      rows_(std::move(transitions)) {
    if (num_states_ <= 0 || num_actions_ <= 0) {
        throw std::invalid_argument("Mdp: state and action counts must be positive");
    }
    if (!(discount_ >= 0.0 && discount_ < 1.0)) {
        throw std::invalid_argument("Mdp: discount must lie in [0, 1)");
    }
    const auto cells = static_cast<std::size_t>(num_states_) * static_cast<std::size_t>(num_actions_);
    if (rewards_.size() != cells || rows_.size() != cells) {
        throw std::invalid_argument("Mdp: reward/transition tables do not match S x A");
    }
    reward_min_ = rewards_.empty() ? 0.0 : rewards_.front();
    reward_max_ = reward_min_;
    for (State s = 0; s < num_states_; ++s) {
        for (Action a = 0; a < num_actions_; ++a) {
            const double r = rewards_[index(s, a)];
            if (!std::isfinite(r)) {
                throw std::invalid_argument("Mdp: non-finite reward at " + where(s, a));
            }
            reward_min_ = std::min(reward_min_, r);
            reward_max_ = std::max(reward_max_, r);

            auto& row = rows_[index(s, a)];
            for (const auto& t : row) {
                if (!valid_state(t.next)) {
                    throw std::invalid_argument("Mdp: successor out of range at " + where(s, a));
                }
                if (!(t.prob >= 0.0 && t.prob <= 1.0)) {
                    throw std::invalid_argument("Mdp: probability outside [0,1] at " + where(s, a));
                }
            }
            std::sort(row.begin(), row.end(),
                      [](const Transition& x, const Transition& y) { return x.next < y.next; });
            // merge duplicate successors, drop exact zeros
            std::vector<Transition> merged;
            merged.reserve(row.size());
            for (const auto& t : row) {
                if (!merged.empty() && merged.back().next == t.next) {
                    merged.back().prob += t.prob;
                } else {
                    merged.push_back(t);
                }
            }
            std::erase_if(merged, [](const Transition& t) { return t.prob == 0.0; });
            const double total = std::accumulate(merged.begin(), merged.end(), 0.0,
                                                 [](double acc, const Transition& t) { return acc + t.prob; });
            if (std::abs(total - 1.0) > kRowSumTolerance) {
                throw std::invalid_argument("Mdp: transition row " + where(s, a) + " sums to " +
                                            std::to_string(total));
            }
            row = std::move(merged);
        }
    }
}

double Mdp::reward_abs_max() const {
    return std::max(std::abs(reward_min_), std::abs(reward_max_));
}

int Mdp::max_branching() const {
    std::size_t widest = 0;
    for (const auto& row : rows_) {
        widest = std::max(widest, row.size());
    }
    return static_cast<int>(widest);
}

void validate_policy(const Mdp& mdp, const Policy& pi) {
    if (pi.size() != static_cast<std::size_t>(mdp.num_states())) {
        throw std::invalid_argument("policy length does not match the number of states");
    }
    for (Action a : pi) {
        if (!mdp.valid_action(a)) {
            throw std::invalid_argument("policy contains an invalid action id " + std::to_string(a));
        }
    }
}

double action_value(const Mdp& mdp, State s, Action a, const ValueVector& v) {
    double future = 0.0;
    for (const auto& t : mdp.successors(s, a)) {
        future += t.prob * v[static_cast<std::size_t>(t.next)];
    }
    return mdp.reward(s, a) + mdp.discount() * future;
}

ValueVector bellman_backup(const Mdp& mdp, const ValueVector& v) {
    if (v.size() != static_cast<std::size_t>(mdp.num_states())) {
        throw std::invalid_argument("bellman_backup: value vector has wrong length");
    }
    ValueVector out(v.size());
    for (State s = 0; s < mdp.num_states(); ++s) {
        double best = action_value(mdp, s, 0, v);
        for (Action a = 1; a < mdp.num_actions(); ++a) {
            best = std::max(best, action_value(mdp, s, a, v));
        }
        out[static_cast<std::size_t>(s)] = best;
    }
    return out;
}

ValueVector policy_restricted_backup(const Mdp& mdp, const Policy& pi, const ValueVector& v) {
    validate_policy(mdp, pi);
    if (v.size() != static_cast<std::size_t>(mdp.num_states())) {
        throw std::invalid_argument("policy_restricted_backup: value vector has wrong length");
    }
    ValueVector out(v.size());
    for (State s = 0; s < mdp.num_states(); ++s) {
        out[static_cast<std::size_t>(s)] = action_value(mdp, s, pi[static_cast<std::size_t>(s)], v);
    }
    return out;
}

ValueVector policy_value(const Mdp& mdp, const Policy& pi, double tol, long max_iterations) {
    validate_policy(mdp, pi);
    return iterate_to_fixed_point(
        mdp, [&](const ValueVector& v) { return policy_restricted_backup(mdp, pi, v); }, tol,
        max_iterations, "policy_value");
}

ValueVector value_iteration(const Mdp& mdp, double tol, long max_iterations) {
    return iterate_to_fixed_point(
        mdp, [&](const ValueVector& v) { return bellman_backup(mdp, v); }, tol, max_iterations,
        "value_iteration");
}

Policy greedy_policy(const Mdp& mdp, const ValueVector& v) {
    Policy pi(static_cast<std::size_t>(mdp.num_states()), 0);
    for (State s = 0; s < mdp.num_states(); ++s) {
        double best = action_value(mdp, s, 0, v);
        for (Action a = 1; a < mdp.num_actions(); ++a) {
            const double q = action_value(mdp, s, a, v);
            if (q > best) {
                best = q;
                pi[static_cast<std::size_t>(s)] = a;
            }
        }
    }
    return pi;
}

Mdp random_mdp(std::uint64_t seed, int num_states, int num_actions, int branching, double discount) {
    if (num_states <= 0 || num_actions <= 0) {
        throw std::invalid_argument("random_mdp: counts must be positive");
    }
    if (branching < 1 || branching > num_states) {
        throw std::invalid_argument("random_mdp: branching must lie in [1, num_states]");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> gamma1(1.0);

    const auto cells = static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions);
    std::vector<double> rewards(cells);
    std::vector<std::vector<Transition>> rows(cells);
    std::vector<State> order(static_cast<std::size_t>(num_states));

    for (std::size_t c = 0; c < cells; ++c) {
        rewards[c] = unit(rng);
        std::iota(order.begin(), order.end(), 0);
        // partial Fisher-Yates: first `branching` entries are the successors
        for (int i = 0; i < branching; ++i) {
            std::uniform_int_distribution<int> pick(i, num_states - 1);
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
        }
        std::vector<double> w(static_cast<std::size_t>(branching));
        double total = 0.0;
        for (auto& x : w) {
            // keep weights away from zero so every successor stays reachable
            x = gamma1(rng) + 1e-3;
            total += x;
        }
        auto& row = rows[c];
        row.reserve(w.size());
        double assigned = 0.0;
        for (int i = 0; i < branching; ++i) {
            double p = w[static_cast<std::size_t>(i)] / total;
            if (i == branching - 1) {
                p = 1.0 - assigned;
            }
            assigned += p;
            row.push_back({order[static_cast<std::size_t>(i)], p});
        }
    }
    return Mdp(num_states, num_actions, discount, std::move(rewards), std::move(rows));
}

double max_norm_diff(const ValueVector& a, const ValueVector& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("max_norm_diff: length mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

double max_norm(const ValueVector& v) {
    double worst = 0.0;
    for (double x : v) {
        worst = std::max(worst, std::abs(x));
    }
    return worst;
}

}  // namespace ospi
