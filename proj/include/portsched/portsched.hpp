// Umbrella header for the deterministic egress-port scheduling toolkit.
#pragma once

#include "portsched/combinability.hpp"
#include "portsched/dqs.hpp"
#include "portsched/flow.hpp"
#include "portsched/nds.hpp"
#include "portsched/rng.hpp"
#include "portsched/schedule.hpp"
#include "portsched/simulator.hpp"
#include "portsched/ticks.hpp"
#include "portsched/workload.hpp"
