#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "ospi/experiment.hpp"
#include "ospi/safety.hpp"
#include "ospi/tree_eval.hpp"

namespace {

int cmd_verify(const std::string& suite, std::uint64_t seed, int trials, bool mutate, const std::string& out_path) {
    const auto backup = mutate ? ospi::Backup::kUndiscountedMutant : ospi::Backup::kDiscounted;
    const auto reports = ospi::run_suite(suite, seed, trials, backup);
    nlohmann::json all = nlohmann::json::array();
    bool passed = true;
    for (const auto& r : reports) {
        all.push_back(nlohmann::json::parse(r.to_json()));
        passed = passed && r.passed();
    }
    if (suite == "counterexample" || suite == "all") {
        const auto fig = ospi::fig1_counterexample();
        const auto v_pi = ospi::policy_value(fig.mdp, fig.pi);
        const auto online = ospi::induced_policy_value(fig.mdp, fig.cf, v_pi);
        std::cerr << "V^pi(A) = " << v_pi[0] << "\nV^pi'(A) = " << online.value[0] << "\n";
    }
    const std::string text = all.dump(2);
    if (out_path.empty()) {
        std::cout << text << "\n";
    } else {
        std::ofstream(out_path) << text << "\n";
    }
    for (const auto& r : reports) {
        std::cerr << r.suite << ": " << (r.passed() ? "PASS" : "FAIL") << " (" << r.violations() << " violations)\n";
    }
    return passed ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::string& out_path) {
    const auto cfg = ospi::ExperimentConfig::load(config_path);
    const std::string csv = ospi::sweep_csv(ospi::run_sweep(cfg));
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        std::ofstream(out_path) << csv;
    }
    return 0;
}

int cmd_eval(const std::string& mdp_path, const std::string& cf_path, int root, const std::string& u_spec) {
    const ospi::Mdp mdp = ospi::load_mdp(mdp_path);
    ospi::ChoiceContext ctx;
    ctx.num_actions = mdp.num_actions();
    ctx.mdp = &mdp;
    const ospi::ParsedChoice parsed = ospi::load_choice(cf_path, ctx);
    if (!mdp.valid_state(root)) {
        throw std::invalid_argument("root state out of range");
    }
    const ospi::ValueVector u = ospi::leaf_values_from_spec(u_spec, mdp, parsed.policy);
    std::cout << ospi::eval_table(mdp, parsed.cf, u, root);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    ospi::init_logging();
    CLI::App app{"Choice-function online search: verification, evaluation and sweeps"};
    app.require_subcommand(1);

    std::string suite = "all";
    std::uint64_t seed = 0;
    int trials = 100;
    bool mutate = false;
    std::string out_path;
    auto* verify = app.add_subcommand("verify", "Run a theorem-verification suite");
    verify->add_option("--suite", suite, "theorem1|theorem2|corollary1|lemmas|counterexample|all")
        ->check(CLI::IsMember({"theorem1", "theorem2", "corollary1", "lemmas", "counterexample", "all"}));
    verify->add_option("--seed", seed, "Root seed");
    verify->add_option("--trials", trials, "Instances per check")->check(CLI::NonNegativeNumber);
    verify->add_flag("--mutate-backup", mutate, "Drop the discount from the tree backup (suite should fail)");
    verify->add_option("--out", out_path, "Write the JSON report here instead of stdout");

    std::string config_path;
    std::string csv_path;
    auto* sweep = app.add_subcommand("sweep", "Run a choice-function hyperparameter sweep");
    sweep->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", csv_path, "Write CSV here instead of stdout");

    std::string mdp_path;
    std::string cf_path;
    int root = 0;
    std::string u_spec = "zero";
    auto* eval = app.add_subcommand("eval", "Exact tree evaluation at one root");
    eval->add_option("--mdp", mdp_path, "MDP file (JSON)")->required();
    eval->add_option("--cf", cf_path, "Choice-function spec (JSON)")->required();
    eval->add_option("--root", root, "Root state");
    eval->add_option("--u", u_spec, "Leaf values: zero|policy|optimal|<file>");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*verify) {
            return cmd_verify(suite, seed, trials, mutate, out_path);
        }
        if (*sweep) {
            return cmd_sweep(config_path, csv_path);
        }
        return cmd_eval(mdp_path, cf_path, root, u_spec);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
