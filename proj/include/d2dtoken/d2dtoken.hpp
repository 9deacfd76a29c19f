#pragma once

#include "d2dtoken/model.hpp"
#include "d2dtoken/tables.hpp"
#include "d2dtoken/solver.hpp"
#include "d2dtoken/sweep.hpp"
#include "d2dtoken/rng.hpp"
#include "d2dtoken/sim.hpp"
#include "d2dtoken/network.hpp"
#include "d2dtoken/learning.hpp"
#include "d2dtoken/mos.hpp"
#include "d2dtoken/compare.hpp"
#include "d2dtoken/config.hpp"
#include "d2dtoken/io.hpp"
