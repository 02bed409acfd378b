#pragma once

#include "karma/allocate.hpp"
#include "karma/baselines.hpp"
#include "karma/config.hpp"
#include "karma/ledger.hpp"
#include "karma/oracle.hpp"
#include "karma/rational.hpp"
#include "karma/sim.hpp"
#include "karma/slice_pool.hpp"
#include "karma/trace.hpp"
