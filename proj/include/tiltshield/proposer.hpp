#pragma once

#include <string>

#include "tiltshield/env.hpp"

namespace tiltshield {

// Anything that can suggest a tilt action for a cell: RL agents and safe
// baselines. Proposers never hold an environment handle; the shield feeds
// them states and executed-action transitions.
class Proposer {
public:
    virtual ~Proposer() = default;

    virtual const std::string& id() const = 0;

    virtual TiltAction propose(const CellState& state, bool explore) = 0;

    // Feedback carrying the action actually performed on the environment.
    virtual void observe(const Transition&) {}

    // Called once per episode with the 1-based episode index.
    virtual void begin_episode(int) {}
};

}  // namespace tiltshield
