#pragma once

#include "specmap/acceptance.hpp"
#include "specmap/cost_model.hpp"
#include "specmap/design_space.hpp"
#include "specmap/errors.hpp"
#include "specmap/formats.hpp"
#include "specmap/planner.hpp"
#include "specmap/profiles.hpp"
#include "specmap/rng.hpp"
#include "specmap/simulator.hpp"
#include "specmap/toy_models.hpp"
