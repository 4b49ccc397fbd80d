#include "poisonlab/detector.hpp"

namespace poisonlab {

Verdict detect(DetectorState& state, double reward) {
    ++state.total;
    if (reward < state.lower || reward > state.upper) {
        ++state.flags;
        return Verdict::adversarial;
    }
    return Verdict::benign;
}

}  // namespace poisonlab
