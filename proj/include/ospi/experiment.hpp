#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ospi/choice.hpp"
#include "ospi/domains.hpp"
#include "ospi/fsss.hpp"
#include "ospi/mdp.hpp"

namespace ospi {

/// Sets the log level from OSPI_LOG (error, warn, info, debug; default warn).
void init_logging();

using ActionOrder = std::function<std::vector<Action>(State)>;

/// What a choice-function spec may refer to besides its own fields.
struct ChoiceContext {
    int num_actions = 0;
    BasePolicy base;  // used when the spec has no "policy" array
    /// Tabular model, if any; enables the "q-pi" ranking.
    const Mdp* mdp = nullptr;
    /// Resolves other ranking names to a per-state action order (best first).
    std::function<ActionOrder(const std::string&)> ranking;
};

struct ParsedChoice {
    ChoiceFunction cf;
    std::optional<Policy> policy;  // the spec's own "policy" array, if any
};

/**
Parses {"family": "rollout"|"lds"|"topk"|"ldcf"|"full"|"explicit", ...}.
Discrepancy proposals for "ldcf" are "all" or {"ranking": name, "widths": [...]}.
Built-in rankings: "identity" and, given a model and a policy, "q-pi".
*/
ParsedChoice choice_from_json_text(const std::string& text, const ChoiceContext& ctx);
ParsedChoice load_choice(const std::string& path, const ChoiceContext& ctx);

/// Parses "s0;a0;s1;..." into a path.
StatePath parse_path(const std::string& text);

/// Order of actions by descending Q^pi(s, .), ties by ascending id.
ActionOrder q_pi_order(const Mdp& mdp, const Policy& pi);

/// "zero", "policy" (V^pi, needs pi), "optimal", or a JSON file holding an array.
ValueVector leaf_values_from_spec(const std::string& spec, const Mdp& mdp, const std::optional<Policy>& pi);

/// Text table of the root V and Q values of T^psi(root).
std::string eval_table(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u, State root);

struct LeafSpec {
    std::string type = "zero";  // "zero", "monte-carlo" or "exact"
    int rollouts = 0;
    int steps = 0;

    std::string label() const;
};

struct DomainSpec {
    std::string type = "gol";  // "gol" or "mdp"
    GolConfig gol;
    std::string mdp_path;
    Policy mdp_policy;  // base policy for "mdp" domains
};

struct ExperimentConfig {
    DomainSpec domain;
    std::string base_policy = "greedy-birth";
    std::vector<LeafSpec> leaf_evaluators;
    std::vector<int> horizons;
    std::vector<std::pair<int, int>> dk;  // (D, K) pairs
    int root_width = 9;
    int internal_width = 1;
    std::string ranking = "greedy-birth";
    std::string planner = "fsss";  // "fsss" or "exact"
    int sample_width = 1;          // C
    Budget budget;
    bool merge_dag = true;
    int episodes = 30;
    int steps = 20;
    std::uint64_t seed = 0;
    double initial_density = 0.5;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    /// Throws std::invalid_argument on invalid grid entries or counts.
    void validate() const;
};

struct SweepRow {
    int config_id = 0;
    int horizon = 0;  // 0 for the base-policy row
    int max_depth = 0;
    int max_discrepancies = 0;
    std::string leaf_eval;
    double normalized_reward = 0.0;
    double ci_halfwidth = 0.0;
    double mean_decision_time_s = 0.0;
    double raw_mean_reward = 0.0;
    std::vector<double> episode_rewards;

    bool is_base() const { return config_id == 0; }
};

/**
Runs the base policy and every (H, (D, K), leaf evaluator) grid point for the
configured number of episodes. Episode e starts from the same state and sees
the same environment randomness under every configuration. Rows come back
sorted by config id; row 0 is the base policy.
*/
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg);

inline constexpr const char* kSweepHeader =
    "config_id,H,D,K,leaf_eval,normalized_reward,ci_halfwidth,mean_decision_time_s,raw_mean_reward";

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace ospi
