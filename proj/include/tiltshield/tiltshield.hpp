#pragma once

// Umbrella header: safe-RL shield architecture for antenna tilt optimisation
// on a self-contained simulated cellular network.

#include "tiltshield/agents.hpp"
#include "tiltshield/baselines.hpp"
#include "tiltshield/config.hpp"
#include "tiltshield/csv.hpp"
#include "tiltshield/dataset.hpp"
#include "tiltshield/env.hpp"
#include "tiltshield/errors.hpp"
#include "tiltshield/harness.hpp"
#include "tiltshield/nn.hpp"
#include "tiltshield/proposer.hpp"
#include "tiltshield/radio_sim.hpp"
#include "tiltshield/rng.hpp"
#include "tiltshield/shield.hpp"
