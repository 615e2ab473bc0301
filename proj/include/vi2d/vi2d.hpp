#pragma once

#include "vi2d/aggregation.hpp"
#include "vi2d/branches.hpp"
#include "vi2d/checks.hpp"
#include "vi2d/coupling.hpp"
#include "vi2d/forecast.hpp"
#include "vi2d/io.hpp"
#include "vi2d/matrix.hpp"
#include "vi2d/numerics.hpp"
#include "vi2d/rng.hpp"
#include "vi2d/scan.hpp"
#include "vi2d/sim.hpp"
#include "vi2d/ssm.hpp"
