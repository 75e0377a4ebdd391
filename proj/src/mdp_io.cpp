#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ospi/mdp.hpp"

namespace ospi {

using nlohmann::json;

namespace {

double number_or_decimal_string(const json& j, const char* what) {
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_string()) {
        const auto& text = j.get_ref<const std::string&>();
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != text.size()) {
            throw std::invalid_argument(std::string("mdp json: malformed ") + what + " '" + text + "'");
        }
        return x;
    }
    throw std::invalid_argument(std::string("mdp json: ") + what + " must be a number or decimal string");
}

}  // namespace

Mdp mdp_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("mdp json: parse error: ") + e.what());
    }
    for (const char* key : {"num_states", "num_actions", "discount", "rewards", "transitions"}) {
        if (!doc.contains(key)) {
            throw std::invalid_argument(std::string("mdp json: missing field '") + key + "'");
        }
    }
    const int ns = doc.at("num_states").get<int>();
    const int na = doc.at("num_actions").get<int>();
    const double discount = number_or_decimal_string(doc.at("discount"), "discount");
    if (ns <= 0 || na <= 0) {
        throw std::invalid_argument("mdp json: counts must be positive");
    }
    const auto& rj = doc.at("rewards");
    const auto& tj = doc.at("transitions");
    if (!rj.is_array() || rj.size() != static_cast<std::size_t>(ns) || !tj.is_array() ||
        tj.size() != static_cast<std::size_t>(ns)) {
        throw std::invalid_argument("mdp json: rewards/transitions must have one entry per state");
    }

    std::vector<double> rewards;
    std::vector<std::vector<Transition>> rows;
    rewards.reserve(static_cast<std::size_t>(ns * na));
    rows.reserve(static_cast<std::size_t>(ns * na));
    for (int s = 0; s < ns; ++s) {
        const auto& rs = rj[static_cast<std::size_t>(s)];
        const auto& ts = tj[static_cast<std::size_t>(s)];
        if (!rs.is_array() || rs.size() != static_cast<std::size_t>(na) || !ts.is_array() ||
            ts.size() != static_cast<std::size_t>(na)) {
            throw std::invalid_argument("mdp json: state " + std::to_string(s) +
                                        " needs one reward and one transition list per action");
        }
        for (int a = 0; a < na; ++a) {
            rewards.push_back(number_or_decimal_string(rs[static_cast<std::size_t>(a)], "reward"));
            std::vector<Transition> row;
            for (const auto& entry : ts[static_cast<std::size_t>(a)]) {
                if (!entry.is_array()) {
                    throw std::invalid_argument("mdp json: transition entries are [next, prob] pairs");
                }
                if (entry.size() == 3) {
                    throw std::invalid_argument(
                        "mdp json: reward-on-transition entries are not supported; use rewards[s][a]");
                }
                if (entry.size() != 2) {
                    throw std::invalid_argument("mdp json: transition entries are [next, prob] pairs");
                }
                row.push_back({entry[0].get<int>(), number_or_decimal_string(entry[1], "probability")});
            }
            rows.push_back(std::move(row));
        }
    }
    return Mdp(ns, na, discount, std::move(rewards), std::move(rows));
}

Mdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open mdp file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return mdp_from_json_text(buf.str());
}

std::string mdp_to_json_text(const Mdp& mdp) {
    json doc;
    doc["num_states"] = mdp.num_states();
    doc["num_actions"] = mdp.num_actions();
    doc["discount"] = mdp.discount();
    json rewards = json::array();
    json transitions = json::array();
    for (State s = 0; s < mdp.num_states(); ++s) {
        json rs = json::array();
        json ts = json::array();
        for (Action a = 0; a < mdp.num_actions(); ++a) {
            rs.push_back(mdp.reward(s, a));
            json row = json::array();
            for (const auto& t : mdp.successors(s, a)) {
                row.push_back(json::array({t.next, t.prob}));
            }
            ts.push_back(std::move(row));
        }
        rewards.push_back(std::move(rs));
        transitions.push_back(std::move(ts));
    }
    doc["rewards"] = std::move(rewards);
    doc["transitions"] = std::move(transitions);
    return doc.dump(2);
}

}  // namespace ospi
