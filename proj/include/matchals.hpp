#pragma once

#include "matchals/errors.hpp"
#include "matchals/hungarian.hpp"
#include "matchals/index_map.hpp"
#include "matchals/io.hpp"
#include "matchals/metrics.hpp"
#include "matchals/pairwise.hpp"
#include "matchals/projection.hpp"
#include "matchals/rng.hpp"
#include "matchals/solver.hpp"
#include "matchals/spectral.hpp"
#include "matchals/synth.hpp"
#include "matchals/types.hpp"
