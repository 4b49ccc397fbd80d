#pragma once

#include <cstdint>

namespace poisonlab {

/// Rule-based reward-outlier detector. Bounds come from the known benign
/// reward range, not from observed data.
struct DetectorState {
    double lower = 0.0;
    double upper = 0.0;
    int64_t flags = 0;
    int64_t total = 0;
};

enum class Verdict { benign, adversarial };

/// Strict comparison: rewards exactly at the bounds are benign.
Verdict detect(DetectorState& state, double reward);

}  // namespace poisonlab
