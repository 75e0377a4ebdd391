#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ospi/choice.hpp"
#include "ospi/fsss.hpp"
#include "ospi/mdp.hpp"
#include "ospi/simulator.hpp"

namespace ospi {

struct GolConfig {
    int rows = 3;
    int cols = 3;
    double noise = 0.0;  // chance each cell takes the opposite of its Conway outcome
    double discount = 0.9;
    std::uint64_t seed = 0;

    int cells() const { return rows * cols; }
    /// Action ids: one per cell in row-major order, then the no-op.
    int num_actions() const { return cells() + 1; }
    Action noop() const { return cells(); }
    void validate() const;
};

/// Bit-encoded grid: bit (r * cols + c) set means the cell is alive.
class GolState {
public:
    GolState(int rows, int cols, State bits) : rows_(rows), cols_(cols), bits_(bits) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    State bits() const { return bits_; }
    bool alive(int r, int c) const { return (bits_ >> (r * cols_ + c)) & 1; }
    int alive_count() const;
    int live_neighbours(int r, int c) const;

private:
    int rows_;
    int cols_;
    State bits_;
};

/**
Noisy Game of Life. The chosen cell is switched on first, then every cell
updates synchronously: with probability (1 - noise) it follows Conway's rule,
otherwise it takes the opposite outcome. The reward is the number of live
cells after the update.
*/
class GolSimulator final : public Simulator {
public:
    explicit GolSimulator(GolConfig cfg);

    int num_actions() const override { return cfg_.num_actions(); }
    double discount() const override { return cfg_.discount; }
    double reward_min() const override { return 0.0; }
    double reward_max() const override { return static_cast<double>(cfg_.cells()); }
    Outcome sample(State s, Action a, Rng& rng) const override;

    const GolConfig& config() const { return cfg_; }
    /// State after the chosen cell is switched on, before the update.
    State activate(State s, Action a) const;
    /// Per-cell probability of being alive after the update from an activated grid.
    std::vector<double> alive_probabilities(State activated) const;
    /// The noise-free successor of an activated grid.
    State conway_step(State activated) const;
    /// Random initial grid, each cell alive with probability `density`.
    State random_state(Rng& rng, double density = 0.5) const;

private:
    GolConfig cfg_;
};

/// Exact tabular model of a grid with at most 12 cells. Rewards are the
/// expected live-cell count after the update.
Mdp gol_tabularize(const GolConfig& cfg);

/// Noise-free next-step live count for every action (ties are possible).
std::vector<double> greedy_birth_scores(const GolConfig& cfg, State s);

/// Actions in descending greedy-birth score. Ties put activations of live
/// cells last, then go by ascending id.
std::vector<Action> greedy_birth_order(const GolConfig& cfg, State s);

/// "greedy-birth", "center" or "noop". Throws std::invalid_argument otherwise.
BasePolicy heuristic_policy(const std::string& kind, const GolConfig& cfg);

/// Tabular policy for grids small enough to tabularize.
Policy tabulate_policy(const BasePolicy& pi, int num_states);

/**
Monte-Carlo leaf evaluator: mean discounted T-step return of pi over n
rollouts. The estimate for a state depends only on (seed, state), and results
are memoized, so repeated queries are free and consistent.
*/
LeafEvaluator mc_leaf_evaluator(std::shared_ptr<const Simulator> sim, BasePolicy pi, int rollouts, int steps,
                                std::uint64_t seed);

/// Exact T-step truncated V^pi on a tabular model.
ValueVector truncated_policy_value(const Mdp& mdp, const Policy& pi, int steps);

}  // namespace ospi
