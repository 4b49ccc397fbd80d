#include "poisonlab/json_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace poisonlab {

using nlohmann::json;

namespace {

json tensor_to_nested(const std::vector<double>& flat, int n_states, int n_actions) {
    json out = json::array();
    size_t k = 0;
    for (int s = 0; s < n_states; ++s) {
        json per_action = json::array();
        for (int a = 0; a < n_actions; ++a) {
            json row = json::array();
            for (int s2 = 0; s2 < n_states; ++s2) row.push_back(flat[k++]);
            per_action.push_back(std::move(row));
        }
        out.push_back(std::move(per_action));
    }
    return out;
}

std::vector<double> nested_to_tensor(const json& nested, int n_states, int n_actions, const char* what) {
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(n_states) * n_actions * n_states);
    if (static_cast<int>(nested.size()) != n_states) throw ConfigError(std::string(what) + ": bad shape");
    for (const auto& per_action : nested) {
        if (static_cast<int>(per_action.size()) != n_actions) throw ConfigError(std::string(what) + ": bad shape");
        for (const auto& row : per_action) {
            if (static_cast<int>(row.size()) != n_states) throw ConfigError(std::string(what) + ": bad shape");
            for (const auto& v : row) flat.push_back(v.get<double>());
        }
    }
    return flat;
}

json mdp_to_json_value(const TabularMDP& mdp) {
    json j;
    j["n_states"] = mdp.n_states();
    j["n_actions"] = mdp.n_actions();
    j["gamma"] = mdp.gamma();
    j["transition"] = tensor_to_nested(mdp.transition_tensor(), mdp.n_states(), mdp.n_actions());
    j["reward"] = tensor_to_nested(mdp.reward_tensor(), mdp.n_states(), mdp.n_actions());
    j["terminal"] = mdp.terminal_mask();
    j["initial"] = mdp.initial_distribution();
    return j;
}

TabularMDP mdp_from_json_value(const json& j) {
    const int n = j.at("n_states").get<int>();
    const int na = j.at("n_actions").get<int>();
    return TabularMDP(n, na, nested_to_tensor(j.at("transition"), n, na, "transition"),
                      nested_to_tensor(j.at("reward"), n, na, "reward"), j.at("gamma").get<double>(),
                      j.at("terminal").get<std::vector<uint8_t>>(),
                      j.at("initial").get<std::vector<double>>());
}

}  // namespace

std::string mdp_to_json(const TabularMDP& mdp) { return mdp_to_json_value(mdp).dump(); }

TabularMDP mdp_from_json(const std::string& text) { return mdp_from_json_value(json::parse(text)); }

std::string augmented_to_json(const AugmentedMDP& aug) {
    json j;
    j["mdp"] = mdp_to_json_value(aug.mdp);
    json state_map = json::array();
    for (int u = 0; u < aug.layout.size(); ++u) {
        state_map.push_back(json::array({aug.layout.x_of(u), aug.layout.rhat_of(u)}));
    }
    j["state_map"] = std::move(state_map);
    j["n_base"] = aug.layout.n_base;
    j["reward_values"] = aug.layout.reward_values;
    j["initial_slice"] = aug.layout.initial_slice;
    return j.dump();
}

AugmentedMDP augmented_from_json(const std::string& text) {
    json j = json::parse(text);
    AugmentedLayout layout;
    layout.n_base = j.at("n_base").get<int>();
    layout.reward_values = j.at("reward_values").get<std::vector<double>>();
    layout.initial_slice = j.at("initial_slice").get<int>();
    return AugmentedMDP{mdp_from_json_value(j.at("mdp")), std::move(layout)};
}

std::string policy_to_json(const TabularPolicy& policy) {
    json rows = json::array();
    for (int s = 0; s < policy.n_states(); ++s) {
        json row = json::array();
        for (int a = 0; a < policy.n_actions(); ++a) row.push_back(policy.prob(s, a));
        rows.push_back(std::move(row));
    }
    return json{{"probs", std::move(rows)}}.dump();
}

TabularPolicy policy_from_json(const std::string& text) {
    json j = json::parse(text);
    const auto& rows = j.at("probs");
    const int n = static_cast<int>(rows.size());
    const int na = n > 0 ? static_cast<int>(rows[0].size()) : 0;
    Matrix m(n, na, 0.0);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < na; ++a) m.at(s, a) = rows[s][a].get<double>();
    return TabularPolicy(std::move(m));
}

std::string qtable_to_json(const Matrix& table) {
    json rows = json::array();
    for (int s = 0; s < table.rows; ++s) {
        json row = json::array();
        for (int a = 0; a < table.cols; ++a) row.push_back(table.at(s, a));
        rows.push_back(std::move(row));
    }
    return json{{"q", std::move(rows)}}.dump();
}

Environment environment_from_mdp_json(const std::string& text, int horizon, uint64_t seed) {
    TabularMDP mdp = mdp_from_json(text);
    const int h = horizon > 0 ? horizon : 4 * mdp.n_states();
    return Environment(std::move(mdp), h, seed, "json");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file '" + path + "'");
    out << content;
    if (!out.good()) throw ConfigError("write failure for '" + path + "'");
}

}  // namespace poisonlab
