#pragma once

#include "freebeacon/aggregation.hpp"
#include "freebeacon/arith.hpp"
#include "freebeacon/baselines.hpp"
#include "freebeacon/beacon.hpp"
#include "freebeacon/config.hpp"
#include "freebeacon/d2d.hpp"
#include "freebeacon/energy.hpp"
#include "freebeacon/engine.hpp"
#include "freebeacon/output.hpp"
#include "freebeacon/radio.hpp"
#include "freebeacon/rng.hpp"
#include "freebeacon/runner.hpp"
#include "freebeacon/schedule.hpp"
