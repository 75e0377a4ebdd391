#include "ospi/safety.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "ospi/seed.hpp"
#include "ospi/simulator.hpp"

namespace ospi {

using nlohmann::json;

namespace {

constexpr double kGamma = 0.9;

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

ValueVector perturbed(const ValueVector& v, double eps, Rng& rng) {
    ValueVector out = v;
    for (double& x : out) {
        x += eps * uniform_real(rng, -1.0, 1.0);
    }
    return out;
}

ValueVector random_vector(std::size_t n, double lo, double hi, Rng& rng) {
    ValueVector v(n);
    for (double& x : v) {
        x = uniform_real(rng, lo, hi);
    }
    return v;
}

Mdp random_instance(Rng& rng, int max_states, int max_actions) {
    const int num_states = uniform_int(rng, 2, max_states);
    const int num_actions = uniform_int(rng, 2, max_actions);
    const int branching = uniform_int(rng, 1, std::min(3, num_states));
    return random_mdp(rng(), num_states, num_actions, branching, kGamma);
}

ValueVector difference(const ValueVector& a, const ValueVector& b) {
    ValueVector d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
    }
    return d;
}

json policy_json(const Policy& pi) { return json(pi); }

json vector_json(const ValueVector& v) { return json(v); }

// Records the outcome of one numeric check on one instance.
class Tallies {
public:
    CheckTally& get(const std::string& name) {
        for (auto& t : tallies_) {
            if (t.name == name) {
                return t;
            }
        }
        tallies_.push_back(CheckTally{name});
        return tallies_.back();
    }

    void record(SuiteReport& report, const std::string& name, double margin, const std::function<json()>& instance) {
        CheckTally& t = get(name);
        ++t.instances;
        t.worst_margin = std::max(t.worst_margin, margin);
        if (!(margin <= kCheckTol)) {
            ++t.violations;
            if (!report.counterexample) {
                json j = instance();
                j["check"] = name;
                j["margin"] = margin;
                report.counterexample = j.dump(2);
            }
        }
    }

    void skip(const std::string& name) { ++get(name).skipped; }

    std::vector<CheckTally> take() { return std::move(tallies_); }

private:
    std::vector<CheckTally> tallies_;
};

json mdp_json(const Mdp& mdp) { return json::parse(mdp_to_json_text(mdp)); }

}  // namespace

std::string SafetyReport::to_json() const {
    json j;
    j["check"] = check;
    j["applicable"] = applicable;
    if (!note.empty()) {
        j["note"] = note;
    }
    j["epsilon"] = epsilon;
    j["min_horizon"] = min_horizon;
    j["bound"] = bound;
    j["tail_bound"] = tail_bound;
    j["worst_violation"] = worst_violation;
    j["holds"] = holds();
    j["deltas"] = deltas;
    if (witness) {
        j["witness"] = witness->to_string();
    }
    return j.dump(2);
}

SafetyReport check_theorem1(const Mdp& mdp, const Policy& pi, const ChoiceFunction& cf, const ValueVector& u,
                            std::size_t node_cap) {
    SafetyReport r;
    r.check = "theorem1";
    const auto roots = all_states(mdp);
    const BasePolicy base = as_base_policy(pi);
    const CheckResult consistent = is_pi_consistent(cf, base, mdp, roots, node_cap);
    const CheckResult monotonic = consistent ? is_monotonic(cf, mdp, roots, node_cap) : CheckResult{};
    if (!consistent || !monotonic) {
        const CheckResult& failed = !consistent ? consistent : monotonic;
        r.applicable = false;
        r.note = std::string(!consistent ? "not pi-consistent" : "not monotonic") + " (" + to_string(failed.verdict) +
                 ")";
        r.witness = failed.witness;
        return r;
    }
    const ValueVector v_pi = policy_value(mdp, pi);
    const double gamma = mdp.discount();
    r.epsilon = max_norm_diff(u, v_pi);
    r.min_horizon = horizons(cf, mdp, roots, node_cap).min_horizon;
    r.bound = 2.0 * r.epsilon * std::pow(gamma, r.min_horizon) / (1.0 - gamma);
    const InducedPolicy online = induced_policy_value(mdp, cf, u, 1e-10, node_cap);
    r.deltas = difference(v_pi, online.value);
    r.worst_violation = *std::max_element(r.deltas.begin(), r.deltas.end()) - r.bound;
    return r;
}

SafetyReport check_corollary1(const Mdp& mdp, const ChoiceFunction& cf, const ValueVector& u,
                              const std::vector<Policy>& policies, std::size_t node_cap) {
    SafetyReport r;
    r.check = "corollary1";
    const auto roots = all_states(mdp);
    const CheckResult monotonic = is_monotonic(cf, mdp, roots, node_cap);
    if (!monotonic) {
        r.applicable = false;
        r.note = std::string("not monotonic (") + to_string(monotonic.verdict) + ")";
        r.witness = monotonic.witness;
        return r;
    }
    const double gamma = mdp.discount();
    r.min_horizon = horizons(cf, mdp, roots, node_cap).min_horizon;
    const double factor = 2.0 * std::pow(gamma, r.min_horizon) / (1.0 - gamma);
    ValueVector best(static_cast<std::size_t>(mdp.num_states()), -std::numeric_limits<double>::infinity());
    int consistent = 0;
    for (const Policy& pi : policies) {
        if (!is_pi_consistent(cf, as_base_policy(pi), mdp, roots, node_cap)) {
            continue;
        }
        ++consistent;
        const ValueVector v_pi = policy_value(mdp, pi);
        const double eps = max_norm_diff(u, v_pi);
        r.epsilon = std::max(r.epsilon, eps);
        for (std::size_t s = 0; s < best.size(); ++s) {
            best[s] = std::max(best[s], v_pi[s] - factor * eps);
        }
    }
    if (consistent == 0) {
        r.note = "vacuous: no policy in the set is consistent with the choice function";
        r.deltas.assign(best.size(), 0.0);
        r.worst_violation = -std::numeric_limits<double>::infinity();
        return r;
    }
    const InducedPolicy online = induced_policy_value(mdp, cf, u, 1e-10, node_cap);
    r.deltas = difference(best, online.value);
    r.worst_violation = *std::max_element(r.deltas.begin(), r.deltas.end());
    r.note = std::to_string(consistent) + " of " + std::to_string(policies.size()) + " policies consistent";
    return r;
}

SafetyReport check_theorem2(const Mdp& mdp, const Policy& pi, std::vector<ChoiceFunction> seq, const ValueVector& u,
                            int horizon_steps, std::size_t node_cap) {
    if (seq.empty()) {
        throw std::invalid_argument("check_theorem2: empty choice-function sequence");
    }
    if (horizon_steps < 0) {
        throw std::invalid_argument("check_theorem2: negative horizon");
    }
    while (static_cast<int>(seq.size()) < horizon_steps) {
        seq.push_back(seq.back());
    }
    SafetyReport r;
    r.check = "theorem2";
    const auto roots = all_states(mdp);
    const BasePolicy base = as_base_policy(pi);
    auto fail = [&](const std::string& what, std::size_t t, const CheckResult& c) {
        r.applicable = false;
        r.note = what + " at t=" + std::to_string(t + 1) + " (" + to_string(c.verdict) + ")";
        r.witness = c.witness;
        return r;
    };
    for (std::size_t t = 0; t < seq.size(); ++t) {
        if (t > 0 && seq[t].same_as(seq[t - 1])) {
            continue;
        }
        if (const auto c = is_pi_consistent(seq[t], base, mdp, roots, node_cap); !c) {
            return fail("not pi-consistent", t, c);
        }
        if (const auto c = is_monotonic(seq[t], mdp, roots, node_cap); !c) {
            return fail("not monotonic", t, c);
        }
        if (t > 0) {
            if (const auto c = subsumes(seq[t], seq[t - 1], mdp, roots, node_cap); !c) {
                return fail("does not subsume its predecessor", t, c);
            }
            if (const auto c = same_leaf_paths(seq[t], seq[t - 1], mdp, roots, node_cap); !c) {
                return fail("leaf paths differ from its predecessor", t, c);
            }
        }
    }
    const ValueVector v_pi = policy_value(mdp, pi);
    const double gamma = mdp.discount();
    r.epsilon = max_norm_diff(u, v_pi);
    r.min_horizon = horizons(seq.front(), mdp, roots, node_cap).min_horizon;
    const NonstationaryValue ns = nonstationary_values(mdp, seq, u, horizon_steps, node_cap);
    r.tail_bound = ns.tail_bound;
    r.bound = 2.0 * r.epsilon * std::pow(gamma, r.min_horizon) / (1.0 - gamma) + r.tail_bound;
    r.deltas = difference(v_pi, ns.value);
    r.worst_violation = *std::max_element(r.deltas.begin(), r.deltas.end()) - r.bound;
    return r;
}

Fig1Instance fig1_counterexample() {
    enum : State { A, B, C, D, E };
    enum : Action { a, b, c, d };
    constexpr int kStates = 5;
    constexpr int kActions = 4;
    std::vector<double> rewards(kStates * kActions, 0.0);
    std::vector<std::vector<Transition>> rows(kStates * kActions);
    auto set = [&](State s, Action act, State next, double reward) {
        rewards[static_cast<std::size_t>(s * kActions + act)] = reward;
        rows[static_cast<std::size_t>(s * kActions + act)] = {{next, 1.0}};
    };
    for (Action act = 0; act < kActions; ++act) {
        set(A, act, A, 0.0);
        set(B, act, B, 1.0);
        set(C, act, C, 0.0);
        set(D, act, D, 0.0);
        set(E, act, E, 0.0);
    }
    set(A, b, B, 1.0);
    set(A, c, C, 0.0);
    set(C, c, D, 600.0);
    set(C, d, E, 0.0);

    Policy pi = {b, b, d, a, a};
    StatePath loop({A, A}, {a});
    StatePath deep({A, A, C}, {a, c});
    StatePath shallow({A, C}, {c});
    std::map<StatePath, ActionSet> overrides = {
        {StatePath(A), {a, b, c}},
        {loop, {b, c}},
        {deep, {c, d}},
        {shallow, {d}},
    };
    return Fig1Instance{
        Mdp(kStates, kActions, kGamma, std::move(rewards), std::move(rows)),
        pi,
        make_explicit(as_base_policy(pi), 4, kActions, std::move(overrides)),
        A,
        10.0,
        0.0,
        {{a, 486.0}, {b, 10.0}, {c, 0.0}},
        a,
        deep,
    };
}

ChoiceFunction RandomLdcf::build(int num_actions) const {
    const BasePolicy base = as_base_policy(pi);
    auto ranking = order;
    DiscrepancyProposal prop = proposal_ranked(
        [ranking](State s) { return ranking[static_cast<std::size_t>(s)]; }, widths, base, max_depth);
    LdcfParams theta{base, horizon, max_discrepancies, max_depth, std::move(prop)};
    return make_ldcf(theta, num_actions);
}

RandomLdcf RandomLdcf::with_k(int k) const {
    RandomLdcf out = *this;
    out.max_discrepancies = k;
    return out;
}

int RandomLdcf::max_width() const { return widths.empty() ? 0 : *std::max_element(widths.begin(), widths.end()); }

std::string RandomLdcf::to_json() const {
    json j;
    j["policy"] = policy_json(pi);
    j["H"] = horizon;
    j["K"] = max_discrepancies;
    j["D"] = max_depth;
    j["widths"] = widths;
    j["order"] = order;
    return j.dump();
}

Policy random_policy(std::uint64_t seed, const Mdp& mdp) {
    Rng rng(seed);
    Policy pi(static_cast<std::size_t>(mdp.num_states()));
    for (Action& a : pi) {
        a = uniform_int(rng, 0, mdp.num_actions() - 1);
    }
    return pi;
}

RandomLdcf random_ldcf(std::uint64_t seed, const Mdp& mdp, const Policy& pi, int max_horizon) {
    if (max_horizon < 1) {
        throw std::invalid_argument("random_ldcf: max_horizon must be at least 1");
    }
    validate_policy(mdp, pi);
    Rng rng(seed);
    RandomLdcf out;
    out.pi = pi;
    out.horizon = uniform_int(rng, 1, max_horizon);
    out.max_discrepancies = uniform_int(rng, 0, out.horizon);
    out.max_depth = uniform_int(rng, 0, out.horizon - 1);
    int width = uniform_int(rng, 0, mdp.num_actions() - 1);
    for (int d = 0; d <= out.max_depth; ++d) {
        out.widths.push_back(width);
        width = uniform_int(rng, 0, width);
    }
    out.order.resize(static_cast<std::size_t>(mdp.num_states()));
    for (auto& ranking : out.order) {
        ranking.resize(static_cast<std::size_t>(mdp.num_actions()));
        std::iota(ranking.begin(), ranking.end(), 0);
        std::shuffle(ranking.begin(), ranking.end(), rng);
    }
    return out;
}

std::vector<Policy> all_policies(const Mdp& mdp) {
    const auto n = static_cast<std::size_t>(mdp.num_states());
    const double count = std::pow(static_cast<double>(mdp.num_actions()), static_cast<double>(n));
    if (count > 1e6) {
        throw std::invalid_argument("all_policies: too many policies to enumerate");
    }
    std::vector<Policy> out;
    Policy pi(n, 0);
    while (true) {
        out.push_back(pi);
        std::size_t i = n;
        while (i > 0) {
            --i;
            if (++pi[i] < mdp.num_actions()) {
                break;
            }
            pi[i] = 0;
            if (i == 0) {
                return out;
            }
        }
        if (n == 0) {
            return out;
        }
    }
}

long SuiteReport::violations() const {
    long n = 0;
    for (const auto& c : checks) {
        n += c.violations;
    }
    return n;
}

std::string SuiteReport::to_json() const {
    json j;
    j["suite"] = suite;
    j["seed"] = seed;
    j["trials"] = trials;
    j["passed"] = passed();
    json checks_json = json::array();
    for (const auto& c : checks) {
        checks_json.push_back({{"name", c.name},
                               {"instances", c.instances},
                               {"violations", c.violations},
                               {"skipped", c.skipped},
                               {"worst_margin", c.instances > 0 ? json(c.worst_margin) : json(nullptr)}});
    }
    j["checks"] = std::move(checks_json);
    if (counterexample) {
        j["counterexample"] = json::parse(*counterexample);
    }
    return j.dump(2);
}

SuiteReport lemma_suite(std::uint64_t seed, int trials, Backup backup) {
    SuiteReport report{"lemmas", seed, trials, {}, std::nullopt};
    Tallies tallies;
    const std::size_t cap = kDefaultNodeCap;
    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t instance_seed = derive_seed(seed, {0x1e33a, static_cast<std::uint64_t>(trial)});
        Rng rng(instance_seed);
        const Mdp mdp = random_instance(rng, 5, 3);
        const auto roots = all_states(mdp);
        const double gamma = mdp.discount();
        const Policy pi = random_policy(rng(), mdp);
        const RandomLdcf ldcf = random_ldcf(rng(), mdp, pi, 3);
        const ChoiceFunction cf = ldcf.build(mdp.num_actions());
        const ValueVector v_pi = policy_value(mdp, pi);
        const auto n = static_cast<std::size_t>(mdp.num_states());
        auto instance = [&](json extra = json::object()) {
            return [&, extra]() {
                json j = extra;
                j["trial"] = trial;
                j["instance_seed"] = instance_seed;
                j["mdp"] = mdp_json(mdp);
                j["ldcf"] = json::parse(ldcf.to_json());
                return j;
            };
        };

        // L1: V - B_pi[V] <= delta implies V - V^pi <= delta / (1 - gamma)
        {
            const ValueVector v = random_vector(n, -5.0, 15.0, rng);
            const ValueVector gap = difference(v, policy_restricted_backup(mdp, pi, v));
            const double delta = std::max(0.0, *std::max_element(gap.begin(), gap.end()));
            const ValueVector lhs = difference(v, v_pi);
            const double margin = *std::max_element(lhs.begin(), lhs.end()) - delta / (1.0 - gamma);
            tallies.record(report, "lemma1", margin, instance({{"v", vector_json(v)}}));
        }

        // L2 and P1 with u = V^pi
        {
            const auto values = path_values(mdp, cf, v_pi, roots, cap, backup);
            double margin = -std::numeric_limits<double>::infinity();
            for (const auto& [path, value] : values) {
                if (path.length() == 0) {
                    continue;
                }
                const auto it = values.find(path.drop_first());
                // monotonic psi keeps the shortened path in the tree
                const double shorter = it == values.end() ? -std::numeric_limits<double>::infinity() : it->second;
                margin = std::max(margin, value - shorter);
            }
            tallies.record(report, "lemma2", margin, instance());
            double root_margin = -std::numeric_limits<double>::infinity();
            for (State s : roots) {
                root_margin = std::max(root_margin, v_pi[static_cast<std::size_t>(s)] - values.at(StatePath(s)));
            }
            tallies.record(report, "prop1", root_margin, instance());
        }

        // L3 and L5 on the LDCF and on an arbitrary history-dependent choice function
        {
            const int hashed_horizon = uniform_int(rng, 1, 4);
            const ChoiceFunction hashed =
                make_hashed(rng(), mdp.num_actions(), uniform_int(rng, 1, hashed_horizon), hashed_horizon);
            for (const ChoiceFunction* psi : {&cf, &hashed}) {
                const Horizons hz = horizons(*psi, mdp, roots, cap);
                const ValueVector u = random_vector(n, 0.0, 10.0, rng);
                const double eps0 = uniform_real(rng, 0.01, 2.0);
                ValueVector shifted = u;
                for (double& x : shifted) {
                    x += eps0;
                }
                for (const ValueVector& u2 : {perturbed(u, eps0, rng), shifted}) {
                    const double eps = max_norm_diff(u, u2);
                    const auto va = path_values(mdp, *psi, u, roots, cap, backup);
                    const auto vb = path_values(mdp, *psi, u2, roots, cap, backup);
                    double m3 = -std::numeric_limits<double>::infinity();
                    double m5 = -std::numeric_limits<double>::infinity();
                    for (const auto& [path, value] : va) {
                        const auto len = static_cast<int>(path.length());
                        const double diff = std::abs(value - vb.at(path));
                        if (len <= hz.min_horizon) {
                            m3 = std::max(m3, diff - eps * std::pow(gamma, hz.min_horizon - len));
                        }
                        if (len >= hz.min_horizon && len <= hz.max_horizon) {
                            m5 = std::max(m5, diff - eps);
                        }
                    }
                    tallies.record(report, "lemma3", m3, instance({{"choice_function", psi->name()}}));
                    tallies.record(report, "lemma5", m5, instance({{"choice_function", psi->name()}}));
                }
            }
        }

        // L4 and P2 with u = V^pi perturbed by up to eps
        {
            const double eps_nominal = std::array<double, 3>{0.0, 0.1, 1.0}[static_cast<std::size_t>(trial % 3)];
            const ValueVector u = perturbed(v_pi, eps_nominal, rng);
            const double eps = max_norm_diff(u, v_pi);
            const int h = horizons(cf, mdp, roots, cap).min_horizon;
            const ValueVector v0 = root_values(mdp, cf, u, cap, backup);
            const Policy online = online_policy(mdp, cf, u, cap);
            const ValueVector adv = difference(v0, policy_restricted_backup(mdp, online, v0));
            const double rhs4 = eps * std::pow(gamma, h) * (1.0 + gamma);
            tallies.record(report, "lemma4", *std::max_element(adv.begin(), adv.end()) - rhs4,
                           instance({{"u", vector_json(u)}}));
            const ValueVector gap = difference(v0, policy_value(mdp, online));
            tallies.record(report, "prop2", *std::max_element(gap.begin(), gap.end()) - rhs4 / (1.0 - gamma),
                           instance({{"u", vector_json(u)}}));
        }

        // L6: nested LDCFs with the same leaf paths, arbitrary u
        {
            const int k_small = uniform_int(rng, 0, ldcf.horizon);
            const int k_big = uniform_int(rng, k_small, ldcf.horizon);
            const ChoiceFunction small = ldcf.with_k(k_small).build(mdp.num_actions());
            const ChoiceFunction big = ldcf.with_k(k_big).build(mdp.num_actions());
            if (!subsumes(big, small, mdp, roots, cap) || !same_leaf_paths(big, small, mdp, roots, cap)) {
                tallies.skip("lemma6");
            } else {
                const ValueVector u = random_vector(n, -5.0, 15.0, rng);
                const auto vs = path_values(mdp, small, u, roots, cap, backup);
                const auto vb = path_values(mdp, big, u, roots, cap, backup);
                double margin = -std::numeric_limits<double>::infinity();
                for (const auto& [path, value] : vs) {
                    const auto it = vb.find(path);
                    margin = std::max(margin, value - (it == vb.end() ? -std::numeric_limits<double>::infinity()
                                                                      : it->second));
                }
                tallies.record(report, "lemma6", margin,
                               instance({{"k_small", k_small}, {"k_big", k_big}, {"u", vector_json(u)}}));
            }
        }

        // P3: leaf count against the closed-form bound
        {
            const double bound = ldcf_leaf_bound(ldcf.horizon, ldcf.max_discrepancies, ldcf.max_depth,
                                                 ldcf.max_width(), mdp.max_branching());
            double margin = -std::numeric_limits<double>::infinity();
            for (State s : roots) {
                margin = std::max(margin, static_cast<double>(leaf_count(build_tree(mdp, cf, s, cap))) - bound);
            }
            tallies.record(report, "prop3", margin, instance({{"bound", bound}}));
        }
    }
    report.checks = tallies.take();
    return report;
}

SuiteReport theorem1_suite(std::uint64_t seed, int trials, const std::vector<double>& epsilons) {
    SuiteReport report{"theorem1", seed, trials, {}, std::nullopt};
    Tallies tallies;
    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t instance_seed = derive_seed(seed, {0x7e01, static_cast<std::uint64_t>(trial)});
        Rng rng(instance_seed);
        const Mdp mdp = random_instance(rng, 8, 4);
        const Policy pi = random_policy(rng(), mdp);
        const RandomLdcf ldcf = random_ldcf(rng(), mdp, pi, 4);
        const ChoiceFunction cf = ldcf.build(mdp.num_actions());
        const ValueVector v_pi = policy_value(mdp, pi);
        for (double eps : epsilons) {
            const std::string name = "theorem1(eps=" + json(eps).dump() + ")";
            const ValueVector u = perturbed(v_pi, eps, rng);
            const SafetyReport r = check_theorem1(mdp, pi, cf, u);
            if (!r.applicable) {
                tallies.skip(name);
                continue;
            }
            tallies.record(report, name, r.worst_violation, [&]() {
                return json{{"trial", trial},
                            {"instance_seed", instance_seed},
                            {"mdp", mdp_json(mdp)},
                            {"ldcf", json::parse(ldcf.to_json())},
                            {"u", vector_json(u)},
                            {"report", json::parse(r.to_json())}};
            });
        }
    }
    report.checks = tallies.take();
    return report;
}

SuiteReport theorem2_suite(std::uint64_t seed, int trials) {
    SuiteReport report{"theorem2", seed, trials, {}, std::nullopt};
    Tallies tallies;
    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t instance_seed = derive_seed(seed, {0x7e02, static_cast<std::uint64_t>(trial)});
        Rng rng(instance_seed);
        const Mdp mdp = random_instance(rng, 6, 3);
        const Policy pi = random_policy(rng(), mdp);
        const RandomLdcf base = random_ldcf(rng(), mdp, pi, 3);
        const ValueVector v_pi = policy_value(mdp, pi);
        const double eps = std::array<double, 3>{0.0, 0.1, 1.0}[static_cast<std::size_t>(trial % 3)];
        const ValueVector u = perturbed(v_pi, eps, rng);

        // K_t = min(t, H): the discrepancy budget grows until it covers the horizon
        std::vector<ChoiceFunction> seq;
        for (int t = 1; t <= base.horizon; ++t) {
            seq.push_back(base.with_k(std::min(t, base.horizon)).build(mdp.num_actions()));
        }
        // smallest T with gamma^T * max|R| / (1 - gamma) < 1e-6
        const double gamma = mdp.discount();
        const double scale = std::max(mdp.reward_abs_max(), 1e-300) / (1.0 - gamma);
        const int steps = std::max(1, static_cast<int>(std::ceil(std::log(1e-6 / scale) / std::log(gamma))) + 1);

        const SafetyReport r = check_theorem2(mdp, pi, seq, u, steps);
        if (!r.applicable) {
            tallies.skip("theorem2");
            continue;
        }
        tallies.record(report, "theorem2", r.worst_violation, [&]() {
            return json{{"trial", trial},
                        {"instance_seed", instance_seed},
                        {"mdp", mdp_json(mdp)},
                        {"ldcf", json::parse(base.to_json())},
                        {"u", vector_json(u)},
                        {"steps", steps},
                        {"report", json::parse(r.to_json())}};
        });
    }
    report.checks = tallies.take();
    return report;
}

SuiteReport corollary1_suite(std::uint64_t seed, int trials) {
    SuiteReport report{"corollary1", seed, trials, {}, std::nullopt};
    Tallies tallies;
    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t instance_seed = derive_seed(seed, {0xc011, static_cast<std::uint64_t>(trial)});
        Rng rng(instance_seed);
        const int num_states = uniform_int(rng, 2, 3);
        const Mdp mdp = random_mdp(rng(), num_states, 2, uniform_int(rng, 1, num_states), kGamma);
        const std::vector<Policy> policies = all_policies(mdp);
        const Policy anchor = policies[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(policies.size()) - 1))];
        const double eps = std::array<double, 3>{0.0, 0.1, 1.0}[static_cast<std::size_t>(trial % 3)];
        const ValueVector u = perturbed(policy_value(mdp, anchor), eps, rng);
        const bool full = trial % 2 == 0;
        const RandomLdcf ldcf = random_ldcf(rng(), mdp, anchor, 3);
        const ChoiceFunction cf =
            full ? make_full_expansion(uniform_int(rng, 1, 3), mdp.num_actions()) : ldcf.build(mdp.num_actions());
        const std::string name = full ? "corollary1(full)" : "corollary1(ldcf)";
        const SafetyReport r = check_corollary1(mdp, cf, u, policies);
        if (!r.applicable) {
            tallies.skip(name);
            continue;
        }
        tallies.record(report, name, r.worst_violation, [&]() {
            return json{{"trial", trial},
                        {"instance_seed", instance_seed},
                        {"mdp", mdp_json(mdp)},
                        {"choice_function", cf.name()},
                        {"u", vector_json(u)},
                        {"report", json::parse(r.to_json())}};
        });
    }
    report.checks = tallies.take();
    return report;
}

SuiteReport counterexample_suite() {
    SuiteReport report{"counterexample", 0, 1, {}, std::nullopt};
    Tallies tallies;
    const Fig1Instance fig = fig1_counterexample();
    const auto roots = all_states(fig.mdp);
    auto instance = [&]() { return json{{"mdp", mdp_json(fig.mdp)}, {"policy", policy_json(fig.pi)}}; };

    const ValueVector v_pi = policy_value(fig.mdp, fig.pi);
    tallies.record(report, "v_pi_root", std::abs(v_pi[0] - fig.v_pi_root), instance);

    const ValueVector u = v_pi;
    const EvalResult eval = evaluate(fig.mdp, fig.cf, u, fig.root);
    const SearchTree tree = build_tree(fig.mdp, fig.cf, fig.root);
    const auto q = eval.root_q(tree);
    double q_err = q.size() == fig.root_q.size() ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < std::min(q.size(), fig.root_q.size()); ++i) {
        q_err = std::max(q_err, q[i].first == fig.root_q[i].first ? std::abs(q[i].second - fig.root_q[i].second)
                                                                   : std::numeric_limits<double>::infinity());
    }
    tallies.record(report, "root_q", q_err, instance);
    tallies.record(report, "online_action", eval.root_best_action == fig.online_action ? 0.0 : 1.0, instance);

    const InducedPolicy online = induced_policy_value(fig.mdp, fig.cf, u);
    tallies.record(report, "v_online_root", std::abs(online.value[0] - fig.v_online_root), instance);

    const CheckResult consistent = is_pi_consistent(fig.cf, as_base_policy(fig.pi), fig.mdp, roots);
    tallies.record(report, "pi_consistent", consistent ? 0.0 : 1.0, instance);
    const CheckResult monotonic = is_monotonic(fig.cf, fig.mdp, {fig.root});
    const bool witnessed = monotonic.verdict == Verdict::kViolated && monotonic.witness == fig.monotonicity_witness;
    tallies.record(report, "not_monotonic", witnessed ? 0.0 : 1.0, instance);
    report.checks = tallies.take();
    return report;
}

std::vector<SuiteReport> run_suite(const std::string& name, std::uint64_t seed, int trials, Backup backup) {
    if (trials < 0) {
        throw std::invalid_argument("trials must be non-negative");
    }
    std::vector<SuiteReport> out;
    const bool all = name == "all";
    if (all || name == "counterexample") {
        out.push_back(counterexample_suite());
    }
    if (all || name == "theorem1") {
        out.push_back(theorem1_suite(seed, trials));
    }
    if (all || name == "corollary1") {
        out.push_back(corollary1_suite(seed, trials));
    }
    if (all || name == "theorem2") {
        out.push_back(theorem2_suite(seed, trials));
    }
    if (all || name == "lemmas") {
        out.push_back(lemma_suite(seed, trials, backup));
    }
    if (out.empty()) {
        throw std::invalid_argument("unknown suite: " + name);
    }
    return out;
}

}  // namespace ospi
