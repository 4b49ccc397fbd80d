#pragma once

#include <cstdint>
#include <string>

#include "poisonlab/adversarial.hpp"
#include "poisonlab/envs.hpp"
#include "poisonlab/mdp.hpp"

namespace poisonlab {

/// Schema: {n_states, n_actions, gamma, transition (nested [s][a][s']),
/// reward (nested [s][a][s']), terminal (array), initial (array)}.
std::string mdp_to_json(const TabularMDP& mdp);
TabularMDP mdp_from_json(const std::string& text);

/// The augmented MDP under the mdp schema plus a sidecar state map
/// augmented-index -> [x, prev_reward].
std::string augmented_to_json(const AugmentedMDP& aug);
AugmentedMDP augmented_from_json(const std::string& text);

/// Policy rows as a nested array.
std::string policy_to_json(const TabularPolicy& policy);
TabularPolicy policy_from_json(const std::string& text);

/// Q table dump (state x action), for debugging.
std::string qtable_to_json(const Matrix& table);

Environment environment_from_mdp_json(const std::string& text, int horizon, uint64_t seed);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace poisonlab
