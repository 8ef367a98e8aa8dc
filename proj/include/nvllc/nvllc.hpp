#pragma once

#include "nvllc/cache.hpp"
#include "nvllc/compression.hpp"
#include "nvllc/config.hpp"
#include "nvllc/ecc.hpp"
#include "nvllc/endurance.hpp"
#include "nvllc/experiment.hpp"
#include "nvllc/forecast.hpp"
#include "nvllc/frame.hpp"
#include "nvllc/rearrange.hpp"
#include "nvllc/rng.hpp"
#include "nvllc/trace.hpp"
