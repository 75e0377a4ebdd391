#include "ospi/domains.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "ospi/seed.hpp"

namespace ospi {

namespace {

constexpr int kMaxCells = 30;
constexpr int kMaxTabularCells = 12;
constexpr std::size_t kMaxTabularEntries = 50'000'000;

bool conway_alive(bool alive, int neighbours) {
    return alive ? (neighbours == 2 || neighbours == 3) : neighbours == 3;
}

}  // namespace

void GolConfig::validate() const {
    if (rows < 1 || cols < 1) {
        throw std::invalid_argument("grid dimensions must be at least 1");
    }
    if (rows * cols > kMaxCells) {
        throw std::invalid_argument("grid has more than 30 cells");
    }
    if (!(noise >= 0.0 && noise <= 0.5)) {
        throw std::invalid_argument("noise must lie in [0, 0.5]");
    }
    if (!(discount >= 0.0 && discount < 1.0)) {
        throw std::invalid_argument("discount must lie in [0, 1)");
    }
}

int GolState::alive_count() const { return std::popcount(static_cast<unsigned>(bits_)); }

int GolState::live_neighbours(int r, int c) const {
    int n = 0;
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) {
                continue;
            }
            const int rr = r + dr;
            const int cc = c + dc;
            if (rr >= 0 && rr < rows_ && cc >= 0 && cc < cols_ && alive(rr, cc)) {
                ++n;
            }
        }
    }
    return n;
}

GolSimulator::GolSimulator(GolConfig cfg) : cfg_(cfg) { cfg_.validate(); }

State GolSimulator::activate(State s, Action a) const {
    if (a < 0 || a > cfg_.noop()) {
        throw std::out_of_range("action out of range");
    }
    if (a == cfg_.noop()) {
        return s;
    }
    return s | (State{1} << a);
}

State GolSimulator::conway_step(State activated) const {
    const GolState g(cfg_.rows, cfg_.cols, activated);
    State next = 0;
    for (int r = 0; r < cfg_.rows; ++r) {
        for (int c = 0; c < cfg_.cols; ++c) {
            if (conway_alive(g.alive(r, c), g.live_neighbours(r, c))) {
                next |= State{1} << (r * cfg_.cols + c);
            }
        }
    }
    return next;
}

std::vector<double> GolSimulator::alive_probabilities(State activated) const {
    const State det = conway_step(activated);
    std::vector<double> p(static_cast<std::size_t>(cfg_.cells()));
    for (int i = 0; i < cfg_.cells(); ++i) {
        p[static_cast<std::size_t>(i)] = ((det >> i) & 1) ? 1.0 - cfg_.noise : cfg_.noise;
    }
    return p;
}

Outcome GolSimulator::sample(State s, Action a, Rng& rng) const {
    const State det = conway_step(activate(s, a));
    if (cfg_.noise == 0.0) {
        return {det, static_cast<double>(std::popcount(static_cast<unsigned>(det)))};
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    State next = det;
    for (int i = 0; i < cfg_.cells(); ++i) {
        if (unif(rng) < cfg_.noise) {
            next ^= State{1} << i;
        }
    }
    return {next, static_cast<double>(std::popcount(static_cast<unsigned>(next)))};
}

State GolSimulator::random_state(Rng& rng, double density) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    State s = 0;
    for (int i = 0; i < cfg_.cells(); ++i) {
        if (unif(rng) < density) {
            s |= State{1} << i;
        }
    }
    return s;
}

Mdp gol_tabularize(const GolConfig& cfg) {
    cfg.validate();
    const int n = cfg.cells();
    if (n > kMaxTabularCells) {
        throw std::invalid_argument("grid too large to tabularize (more than 12 cells)");
    }
    const int num_states = 1 << n;
    const int num_actions = cfg.num_actions();
    const std::size_t row_size = cfg.noise > 0.0 ? std::size_t{1} << n : 1;
    if (static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions) * row_size >
        kMaxTabularEntries) {
        throw std::invalid_argument("tabular model too large for this grid and noise level");
    }
    const GolSimulator sim(cfg);
    std::vector<double> rewards(static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions));
    std::vector<std::vector<Transition>> transitions(rewards.size());
    for (State s = 0; s < num_states; ++s) {
        for (Action a = 0; a < num_actions; ++a) {
            const std::size_t idx = static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions) +
                                    static_cast<std::size_t>(a);
            const State activated = sim.activate(s, a);
            const std::vector<double> p = sim.alive_probabilities(activated);
            rewards[idx] = std::accumulate(p.begin(), p.end(), 0.0);
            auto& row = transitions[idx];
            if (cfg.noise == 0.0) {
                row.push_back({sim.conway_step(activated), 1.0});
                continue;
            }
            row.reserve(row_size);
            for (State next = 0; next < num_states; ++next) {
                double prob = 1.0;
                for (int i = 0; i < n; ++i) {
                    const double pi = p[static_cast<std::size_t>(i)];
                    prob *= ((next >> i) & 1) ? pi : 1.0 - pi;
                }
                row.push_back({next, prob});
            }
        }
    }
    return Mdp(num_states, num_actions, cfg.discount, std::move(rewards), std::move(transitions));
}

std::vector<double> greedy_birth_scores(const GolConfig& cfg, State s) {
    GolConfig det = cfg;
    det.noise = 0.0;
    const GolSimulator sim(det);
    std::vector<double> scores(static_cast<std::size_t>(cfg.num_actions()));
    for (Action a = 0; a < cfg.num_actions(); ++a) {
        scores[static_cast<std::size_t>(a)] =
            static_cast<double>(std::popcount(static_cast<unsigned>(sim.conway_step(sim.activate(s, a)))));
    }
    return scores;
}

std::vector<Action> greedy_birth_order(const GolConfig& cfg, State s) {
    const std::vector<double> scores = greedy_birth_scores(cfg, s);
    std::vector<Action> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    // activating a live cell changes nothing, so those rank behind the no-op
    auto redundant = [&](Action a) { return a != cfg.noop() && ((s >> a) & 1); };
    std::stable_sort(order.begin(), order.end(), [&](Action x, Action y) {
        const double sx = scores[static_cast<std::size_t>(x)];
        const double sy = scores[static_cast<std::size_t>(y)];
        if (sx != sy) {
            return sx > sy;
        }
        return !redundant(x) && redundant(y);
    });
    return order;
}

BasePolicy heuristic_policy(const std::string& kind, const GolConfig& cfg) {
    cfg.validate();
    if (kind == "greedy-birth") {
        return [cfg](State s) { return greedy_birth_order(cfg, s).front(); };
    }
    if (kind == "center") {
        return [cfg](State s) {
            Action best = cfg.noop();
            int best_dist = 0;
            for (int r = 0; r < cfg.rows; ++r) {
                for (int c = 0; c < cfg.cols; ++c) {
                    const Action a = r * cfg.cols + c;
                    if ((s >> a) & 1) {
                        continue;
                    }
                    // doubled coordinates keep the centre on the integer grid
                    const int dr = 2 * r - (cfg.rows - 1);
                    const int dc = 2 * c - (cfg.cols - 1);
                    const int dist = dr * dr + dc * dc;
                    if (best == cfg.noop() || dist < best_dist) {
                        best = a;
                        best_dist = dist;
                    }
                }
            }
            return best;
        };
    }
    if (kind == "noop") {
        return [cfg](State) { return cfg.noop(); };
    }
    throw std::invalid_argument("unknown heuristic policy: " + kind);
}

Policy tabulate_policy(const BasePolicy& pi, int num_states) {
    Policy out(static_cast<std::size_t>(num_states));
    for (State s = 0; s < num_states; ++s) {
        out[static_cast<std::size_t>(s)] = pi(s);
    }
    return out;
}

LeafEvaluator mc_leaf_evaluator(std::shared_ptr<const Simulator> sim, BasePolicy pi, int rollouts, int steps,
                                std::uint64_t seed) {
    if (!sim || !pi) {
        throw std::invalid_argument("mc_leaf_evaluator needs a simulator and a policy");
    }
    if (rollouts < 1 || steps < 0) {
        throw std::invalid_argument("mc_leaf_evaluator: rollouts >= 1 and steps >= 0 required");
    }
    struct Cache {
        std::mutex mu;
        std::unordered_map<State, double> values;
    };
    auto cache = std::make_shared<Cache>();
    return [sim = std::move(sim), pi = std::move(pi), rollouts, steps, seed, cache](State s) {
        {
            std::lock_guard lock(cache->mu);
            if (auto it = cache->values.find(s); it != cache->values.end()) {
                return it->second;
            }
        }
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(s)}));
        const double gamma = sim->discount();
        double total = 0.0;
        for (int i = 0; i < rollouts; ++i) {
            State cur = s;
            double discount = 1.0;
            double ret = 0.0;
            for (int t = 0; t < steps; ++t) {
                const Outcome o = sim->sample(cur, pi(cur), rng);
                ret += discount * o.reward;
                discount *= gamma;
                cur = o.next;
            }
            total += ret;
        }
        const double v = total / rollouts;
        std::lock_guard lock(cache->mu);
        cache->values.emplace(s, v);
        return v;
    };
}

ValueVector truncated_policy_value(const Mdp& mdp, const Policy& pi, int steps) {
    validate_policy(mdp, pi);
    ValueVector v(static_cast<std::size_t>(mdp.num_states()), 0.0);
    for (int t = 0; t < steps; ++t) {
        v = policy_restricted_backup(mdp, pi, v);
    }
    return v;
}

}  // namespace ospi
