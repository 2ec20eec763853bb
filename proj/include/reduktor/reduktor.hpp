// reduktor.hpp: umbrella header.
#pragma once

#include "asymptotics.hpp"
#include "channel.hpp"
#include "dstoch.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "jump_mc.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "scalar.hpp"
#include "volterra.hpp"
