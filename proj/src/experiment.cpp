#include "ospi/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "ospi/seed.hpp"
#include "ospi/tree_eval.hpp"

namespace ospi {

using nlohmann::json;

void init_logging() {
    static bool done = false;
    if (!done) {
        spdlog::set_default_logger(spdlog::stderr_logger_mt("ospi"));
        spdlog::set_pattern("[%l] %v");
        done = true;
    }
    const char* env = std::getenv("OSPI_LOG");
    const std::string level = env ? env : "warn";
    if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else if (level == "info") {
        spdlog::set_level(spdlog::level::info);
    } else if (level == "error") {
        spdlog::set_level(spdlog::level::err);
    } else {
        spdlog::set_level(spdlog::level::warn);
    }
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string(what) + ": " + e.what());
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

int require_int(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw std::invalid_argument(std::string("choice spec: missing \"") + key + "\"");
    }
    return j.at(key).get<int>();
}

ActionOrder identity_order(int num_actions) {
    return [num_actions](State) {
        std::vector<Action> out(static_cast<std::size_t>(num_actions));
        std::iota(out.begin(), out.end(), 0);
        return out;
    };
}

std::string fmt_num(double x) { return fmt::format("{:.10g}", x); }

}  // namespace

StatePath parse_path(const std::string& text) {
    std::vector<State> states;
    std::vector<Action> actions;
    std::stringstream ss(text);
    std::string token;
    bool expect_state = true;
    while (std::getline(ss, token, ';')) {
        std::size_t used = 0;
        int value = 0;
        try {
            value = std::stoi(token, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad path \"" + text + "\"");
        }
        if (used != token.size()) {
            throw std::invalid_argument("bad path \"" + text + "\"");
        }
        (expect_state ? states : actions).push_back(value);
        expect_state = !expect_state;
    }
    if (states.empty() || expect_state) {
        throw std::invalid_argument("bad path \"" + text + "\": must start and end with a state");
    }
    return StatePath(std::move(states), std::move(actions));
}

ActionOrder q_pi_order(const Mdp& mdp, const Policy& pi) {
    const ValueVector v = policy_value(mdp, pi);
    std::vector<std::vector<Action>> orders(static_cast<std::size_t>(mdp.num_states()));
    for (State s = 0; s < mdp.num_states(); ++s) {
        auto& order = orders[static_cast<std::size_t>(s)];
        std::vector<double> q(static_cast<std::size_t>(mdp.num_actions()));
        for (Action a = 0; a < mdp.num_actions(); ++a) {
            q[static_cast<std::size_t>(a)] = action_value(mdp, s, a, v);
            order.push_back(a);
        }
        std::stable_sort(order.begin(), order.end(), [&](Action x, Action y) {
            return q[static_cast<std::size_t>(x)] > q[static_cast<std::size_t>(y)];
        });
    }
    return [orders = std::move(orders)](State s) { return orders.at(static_cast<std::size_t>(s)); };
}

ParsedChoice choice_from_json_text(const std::string& text, const ChoiceContext& ctx) {
    const json j = parse_json(text, "choice spec");
    if (!j.is_object() || !j.contains("family")) {
        throw std::invalid_argument("choice spec: expected an object with \"family\"");
    }
    const auto family = j.at("family").get<std::string>();
    const int num_actions = ctx.num_actions;
    std::optional<Policy> policy;
    BasePolicy base = ctx.base;
    if (j.contains("policy")) {
        policy = j.at("policy").get<Policy>();
        for (Action a : *policy) {
            if (a < 0 || a >= num_actions) {
                throw std::invalid_argument("choice spec: policy action out of range");
            }
        }
        base = as_base_policy(*policy);
    }
    auto need_base = [&]() {
        if (!base) {
            throw std::invalid_argument("choice spec: family \"" + family + "\" needs a base policy");
        }
        return base;
    };
    auto resolve = [&](const std::string& name) -> ActionOrder {
        if (name == "identity") {
            return identity_order(num_actions);
        }
        if (name == "q-pi" && ctx.mdp && policy) {
            return q_pi_order(*ctx.mdp, *policy);
        }
        if (!ctx.ranking) {
            throw std::invalid_argument("choice spec: unknown ranking \"" + name + "\"");
        }
        return ctx.ranking(name);
    };

    if (family == "rollout") {
        return {make_rollout(need_base(), require_int(j, "H"), num_actions), policy};
    }
    if (family == "lds") {
        return {make_lds(need_base(), require_int(j, "H"), require_int(j, "K"), num_actions), policy};
    }
    if (family == "full") {
        return {make_full_expansion(require_int(j, "H"), num_actions), policy};
    }
    if (family == "topk") {
        const ActionOrder order = resolve(get_or<std::string>(j, "ranking", "identity"));
        RankFunction rank = [order](const StatePath& p, Action a) {
            const auto o = order(p.last_state());
            const auto it = std::find(o.begin(), o.end(), a);
            return -static_cast<double>(it - o.begin());
        };
        const bool force = get_or<bool>(j, "force_consistent", true);
        return {make_topk(std::move(rank), require_int(j, "k"), require_int(j, "H"), force ? need_base() : base,
                          num_actions, force),
                policy};
    }
    if (family == "ldcf") {
        LdcfParams theta;
        theta.base_policy = need_base();
        theta.horizon = require_int(j, "H");
        theta.max_discrepancies = require_int(j, "K");
        theta.max_discrepancy_depth = require_int(j, "D");
        const json delta = j.contains("delta") ? j.at("delta") : json("all");
        if (delta.is_string() && delta.get<std::string>() == "all") {
            theta.proposal = proposal_all(num_actions, theta.max_discrepancy_depth);
        } else if (delta.is_object()) {
            theta.proposal = proposal_ranked(resolve(get_or<std::string>(delta, "ranking", "identity")),
                                             delta.at("widths").get<std::vector<int>>(), theta.base_policy,
                                             theta.max_discrepancy_depth);
        } else {
            throw std::invalid_argument("choice spec: delta must be \"all\" or {ranking, widths}");
        }
        return {make_ldcf(theta, num_actions), policy};
    }
    if (family == "explicit") {
        std::map<StatePath, ActionSet> overrides;
        for (const auto& entry : get_or<json>(j, "overrides", json::array())) {
            ActionSet set = entry.at("actions").get<ActionSet>();
            std::sort(set.begin(), set.end());
            overrides[parse_path(entry.at("path").get<std::string>())] = std::move(set);
        }
        return {make_explicit(need_base(), require_int(j, "H"), num_actions, std::move(overrides)), policy};
    }
    throw std::invalid_argument("choice spec: unknown family \"" + family + "\"");
}

ParsedChoice load_choice(const std::string& path, const ChoiceContext& ctx) {
    return choice_from_json_text(read_file(path), ctx);
}

ValueVector leaf_values_from_spec(const std::string& spec, const Mdp& mdp, const std::optional<Policy>& pi) {
    const auto n = static_cast<std::size_t>(mdp.num_states());
    if (spec == "zero") {
        return ValueVector(n, 0.0);
    }
    if (spec == "policy") {
        if (!pi) {
            throw std::invalid_argument("leaf spec \"policy\" needs a policy in the choice spec");
        }
        return policy_value(mdp, *pi);
    }
    if (spec == "optimal") {
        return value_iteration(mdp);
    }
    const json j = parse_json(read_file(spec), "leaf values");
    ValueVector u = j.get<ValueVector>();
    if (u.size() != n) {
        throw std::invalid_argument("leaf values: expected " + std::to_string(n) + " entries");
    }
    return u;
}

std::string eval_table(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u, State root) {
    const SearchTree tree = build_tree(mdp, cf, root);
    const EvalResult r = evaluate_tree(mdp, tree, u);
    std::string out = fmt::format("root {}  nodes {}  leaves {}\n", root, tree.size(), leaf_count(tree));
    for (const auto& [a, q] : r.root_q(tree)) {
        out += fmt::format("Q({}) = {}\n", a, fmt_num(q));
    }
    out += fmt::format("V = {}\n", fmt_num(r.root_value));
    if (r.root_best_action >= 0) {
        out += fmt::format("best action = {}\n", r.root_best_action);
    } else {
        out += "root is a leaf\n";
    }
    return out;
}

std::string LeafSpec::label() const {
    if (type == "monte-carlo") {
        return fmt::format("mc(n={};T={})", rollouts, steps);
    }
    return type;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    const json j = parse_json(text, "experiment config");
    ExperimentConfig cfg;
    if (j.contains("domain")) {
        const json& d = j.at("domain");
        cfg.domain.type = get_or<std::string>(d, "type", "gol");
        if (cfg.domain.type == "gol") {
            cfg.domain.gol.rows = get_or<int>(d, "rows", 3);
            cfg.domain.gol.cols = get_or<int>(d, "cols", 3);
            cfg.domain.gol.noise = get_or<double>(d, "noise", 0.0);
            cfg.domain.gol.discount = get_or<double>(d, "discount", 0.9);
        } else if (cfg.domain.type == "mdp") {
            cfg.domain.mdp_path = d.at("path").get<std::string>();
            cfg.domain.mdp_policy = d.at("policy").get<Policy>();
        } else {
            throw std::invalid_argument("experiment config: unknown domain type " + cfg.domain.type);
        }
    }
    cfg.base_policy = get_or<std::string>(j, "base_policy", cfg.base_policy);
    for (const auto& l : get_or<json>(j, "leaf_evaluators", json::array())) {
        LeafSpec spec;
        spec.type = l.at("type").get<std::string>();
        spec.rollouts = get_or<int>(l, "n", 0);
        spec.steps = get_or<int>(l, "T", 0);
        cfg.leaf_evaluators.push_back(spec);
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        cfg.horizons = get_or<std::vector<int>>(g, "H", {});
        for (const auto& pair : get_or<json>(g, "DK", json::array())) {
            cfg.dk.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
        }
        cfg.root_width = get_or<int>(g, "root_width", cfg.root_width);
        cfg.internal_width = get_or<int>(g, "internal_width", cfg.internal_width);
        cfg.ranking = get_or<std::string>(g, "ranking", cfg.ranking);
    }
    if (j.contains("planner")) {
        const json& p = j.at("planner");
        cfg.planner = get_or<std::string>(p, "type", cfg.planner);
        cfg.sample_width = get_or<int>(p, "C", cfg.sample_width);
        cfg.budget.max_trials = get_or<long>(p, "max_trials", cfg.budget.max_trials);
        cfg.budget.max_sim_calls = get_or<long>(p, "max_sim_calls", cfg.budget.max_sim_calls);
        cfg.merge_dag = get_or<bool>(p, "merge_dag", cfg.merge_dag);
    }
    cfg.episodes = get_or<int>(j, "episodes", cfg.episodes);
    cfg.steps = get_or<int>(j, "steps", cfg.steps);
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.initial_density = get_or<double>(j, "initial_density", cfg.initial_density);
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) { return from_json_text(read_file(path)); }

void ExperimentConfig::validate() const {
    if (domain.type == "gol") {
        domain.gol.validate();
    }
    if (episodes < 1 || steps < 1) {
        throw std::invalid_argument("experiment config: episodes and steps must be positive");
    }
    for (int h : horizons) {
        if (h < 1) {
            throw std::invalid_argument("experiment config: H must be at least 1");
        }
        for (const auto& [d, k] : dk) {
            if (d < 0 || k < 0 || k > h || d >= h) {
                throw std::invalid_argument(
                    fmt::format("experiment config: (D={}, K={}) invalid for H={} (need K <= H, D < H)", d, k, h));
            }
        }
    }
    if (root_width < internal_width || internal_width < 0) {
        throw std::invalid_argument("experiment config: need root_width >= internal_width >= 0");
    }
    if (planner != "fsss" && planner != "exact") {
        throw std::invalid_argument("experiment config: planner must be \"fsss\" or \"exact\"");
    }
    if (sample_width < 1 || budget.max_trials < 1 || budget.max_sim_calls < 1) {
        throw std::invalid_argument("experiment config: C and budgets must be positive");
    }
    for (const auto& l : leaf_evaluators) {
        if (l.type != "zero" && l.type != "monte-carlo" && l.type != "exact") {
            throw std::invalid_argument("experiment config: unknown leaf evaluator " + l.type);
        }
        if (l.type == "monte-carlo" && (l.rollouts < 1 || l.steps < 0)) {
            throw std::invalid_argument("experiment config: monte-carlo needs n >= 1 and T >= 0");
        }
    }
    if (!(initial_density >= 0.0 && initial_density <= 1.0)) {
        throw std::invalid_argument("experiment config: initial_density must lie in [0, 1]");
    }
}

namespace {

struct Environment {
    std::shared_ptr<const Simulator> sim;
    std::shared_ptr<const Mdp> tabular;  // null unless needed and available
    BasePolicy base;
    Policy tabular_base;
    ActionOrder order;
    std::function<State(Rng&)> initial;
};

Environment make_environment(const ExperimentConfig& cfg, bool need_tabular) {
    Environment env;
    if (cfg.domain.type == "gol") {
        const GolConfig& gol = cfg.domain.gol;
        auto sim = std::make_shared<const GolSimulator>(gol);
        env.sim = sim;
        env.base = heuristic_policy(cfg.base_policy, gol);
        const double density = cfg.initial_density;
        env.initial = [sim, density](Rng& rng) { return sim->random_state(rng, density); };
        if (need_tabular) {
            env.tabular = std::make_shared<const Mdp>(gol_tabularize(gol));
            env.tabular_base = tabulate_policy(env.base, env.tabular->num_states());
        }
    } else {
        auto mdp = std::make_shared<const Mdp>(load_mdp(cfg.domain.mdp_path));
        validate_policy(*mdp, cfg.domain.mdp_policy);
        env.sim = std::make_shared<const MdpSimulator>(mdp);
        env.tabular = mdp;
        env.tabular_base = cfg.domain.mdp_policy;
        env.base = as_base_policy(cfg.domain.mdp_policy);
        const int n = mdp->num_states();
        env.initial = [n](Rng& rng) { return std::uniform_int_distribution<State>(0, n - 1)(rng); };
    }
    const int num_actions = env.sim->num_actions();
    if (cfg.ranking == "greedy-birth" && cfg.domain.type == "gol") {
        const GolConfig gol = cfg.domain.gol;
        env.order = [gol](State s) { return greedy_birth_order(gol, s); };
    } else if (cfg.ranking == "q-pi") {
        if (!env.tabular) {
            throw std::invalid_argument("ranking q-pi needs a tabular domain");
        }
        env.order = q_pi_order(*env.tabular, env.tabular_base);
    } else if (cfg.ranking == "identity") {
        env.order = identity_order(num_actions);
    } else {
        throw std::invalid_argument("unknown ranking " + cfg.ranking + " for this domain");
    }
    return env;
}

LeafEvaluator make_leaf(const LeafSpec& spec, const Environment& env, std::uint64_t seed) {
    if (spec.type == "zero") {
        return [](State) { return 0.0; };
    }
    if (spec.type == "monte-carlo") {
        return mc_leaf_evaluator(env.sim, env.base, spec.rollouts, spec.steps, seed);
    }
    if (!env.tabular) {
        throw std::invalid_argument("exact leaf evaluation needs a tabular domain");
    }
    return leaf_from_vector(policy_value(*env.tabular, env.tabular_base));
}

using Decider = std::function<Action(State, std::uint64_t)>;

struct EpisodeStats {
    std::vector<double> rewards;
    double total_time = 0.0;
    long decisions = 0;
};

EpisodeStats run_episodes(const ExperimentConfig& cfg, const Environment& env, const Decider& decide, int config_id) {
    EpisodeStats stats;
    for (int e = 0; e < cfg.episodes; ++e) {
        const auto ep = static_cast<std::uint64_t>(e);
        Rng init_rng(derive_seed(cfg.seed, {1, ep}));
        Rng env_rng(derive_seed(cfg.seed, {2, ep}));
        State s = env.initial(init_rng);
        double total = 0.0;
        for (int t = 0; t < cfg.steps; ++t) {
            const std::uint64_t plan_seed =
                derive_seed(cfg.seed, {3, static_cast<std::uint64_t>(config_id), ep, static_cast<std::uint64_t>(t)});
            const auto start = std::chrono::steady_clock::now();
            const Action a = decide(s, plan_seed);
            stats.total_time += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            ++stats.decisions;
            const Outcome o = env.sim->sample(s, a, env_rng);
            total += o.reward;
            s = o.next;
        }
        stats.rewards.push_back(total);
    }
    return stats;
}

double mean(const std::vector<double>& xs) { return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size()); }

double stderr_of(const std::vector<double>& xs) {
    if (xs.size() < 2) {
        return 0.0;
    }
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const bool need_tabular =
        cfg.planner == "exact" || std::any_of(cfg.leaf_evaluators.begin(), cfg.leaf_evaluators.end(),
                                              [](const LeafSpec& l) { return l.type == "exact"; });
    const Environment env = make_environment(cfg, need_tabular);
    const int num_actions = env.sim->num_actions();

    std::vector<SweepRow> rows;
    auto finish = [&](SweepRow row, const EpisodeStats& stats, double base_mean) {
        row.episode_rewards = stats.rewards;
        row.raw_mean_reward = mean(stats.rewards);
        if (base_mean != 0.0) {
            row.normalized_reward = row.raw_mean_reward / base_mean;
            row.ci_halfwidth = 1.96 * stderr_of(stats.rewards) / std::abs(base_mean);
        } else {
            spdlog::warn("base policy mean reward is zero; normalized reward undefined");
            row.normalized_reward = std::numeric_limits<double>::quiet_NaN();
            row.ci_halfwidth = std::numeric_limits<double>::quiet_NaN();
        }
        row.mean_decision_time_s = stats.total_time / static_cast<double>(std::max(1L, stats.decisions));
        rows.push_back(std::move(row));
    };

    const BasePolicy base = env.base;
    const EpisodeStats base_stats = run_episodes(cfg, env, [&](State s, std::uint64_t) { return base(s); }, 0);
    const double base_mean = mean(base_stats.rewards);
    SweepRow base_row;
    base_row.leaf_eval = "base";
    finish(base_row, base_stats, base_mean);
    spdlog::info("base policy: mean episode reward {}", base_mean);

    std::vector<LeafEvaluator> leaves;
    std::vector<ValueVector> leaf_vectors;
    for (std::size_t i = 0; i < cfg.leaf_evaluators.size(); ++i) {
        leaves.push_back(make_leaf(cfg.leaf_evaluators[i], env, derive_seed(cfg.seed, {4, i})));
        if (cfg.planner == "exact") {
            ValueVector u(static_cast<std::size_t>(env.tabular->num_states()));
            for (State s = 0; s < env.tabular->num_states(); ++s) {
                u[static_cast<std::size_t>(s)] = leaves.back()(s);
            }
            leaf_vectors.push_back(std::move(u));
        }
    }

    int config_id = 0;
    for (int h : cfg.horizons) {
        for (const auto& [d, k] : cfg.dk) {
            std::vector<int> widths(static_cast<std::size_t>(d + 1), cfg.internal_width);
            widths.front() = cfg.root_width;
            LdcfParams theta{base, h, k, d, proposal_ranked(env.order, widths, base, d)};
            const ChoiceFunction cf = make_ldcf(theta, num_actions);
            for (std::size_t li = 0; li < leaves.size(); ++li) {
                ++config_id;
                Decider decide;
                if (cfg.planner == "exact") {
                    const Mdp& mdp = *env.tabular;
                    const ValueVector& u = leaf_vectors[li];
                    decide = [&mdp, cf, &u](State s, std::uint64_t) { return act(mdp, cf, u, s); };
                } else {
                    FsssOptions options;
                    options.width = cfg.sample_width;
                    options.budget = cfg.budget;
                    options.merge_dag = cfg.merge_dag && cf.depth_and_discrepancy_only();
                    const LeafEvaluator& u = leaves[li];
                    const Simulator& sim = *env.sim;
                    decide = [&sim, cf, &u, options](State s, std::uint64_t seed) {
                        return fsss_act(sim, cf, u, s, options, seed).action;
                    };
                }
                const EpisodeStats stats = run_episodes(cfg, env, decide, config_id);
                SweepRow row;
                row.config_id = config_id;
                row.horizon = h;
                row.max_depth = d;
                row.max_discrepancies = k;
                row.leaf_eval = cfg.leaf_evaluators[li].label();
                finish(std::move(row), stats, base_mean);
                spdlog::info("config {} H={} D={} K={} {}: normalized {}", config_id, h, d, k,
                             cfg.leaf_evaluators[li].label(), rows.back().normalized_reward);
            }
        }
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = std::string(kSweepHeader) + "\n";
    for (const auto& r : rows) {
        const std::string hdk =
            r.is_base() ? std::string(",,") : fmt::format("{},{},{}", r.horizon, r.max_depth, r.max_discrepancies);
        out += fmt::format("{},{},{},{:.9g},{:.9g},{:.6e},{:.9g}\n", r.config_id, hdk, r.leaf_eval,
                           r.normalized_reward, r.ci_halfwidth, r.mean_decision_time_s, r.raw_mean_reward);
    }
    return out;
}

}  // namespace ospi
