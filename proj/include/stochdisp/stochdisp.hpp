#pragma once

#include "stochdisp/config.hpp"
#include "stochdisp/duhamel.hpp"
#include "stochdisp/error.hpp"
#include "stochdisp/evolve.hpp"
#include "stochdisp/experiments.hpp"
#include "stochdisp/grid.hpp"
#include "stochdisp/norms.hpp"
#include "stochdisp/opnorm.hpp"
#include "stochdisp/paths.hpp"
#include "stochdisp/potentials.hpp"
#include "stochdisp/pseudoconformal.hpp"
#include "stochdisp/seeding.hpp"
