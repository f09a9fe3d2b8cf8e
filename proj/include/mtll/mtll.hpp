// Umbrella header.
#pragma once

#include "bench.hpp"
#include "errors.hpp"
#include "filters.hpp"
#include "lock.hpp"
#include "mne.hpp"
#include "model.hpp"
#include "numeric.hpp"
#include "particle.hpp"
#include "rng.hpp"
#include "sde_sim.hpp"
#include "stats.hpp"
#include "trackers.hpp"
#include "zakai.hpp"
