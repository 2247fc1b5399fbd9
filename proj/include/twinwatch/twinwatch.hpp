#pragma once

// Umbrella header.

#include "twinwatch/core/errors.hpp"
#include "twinwatch/core/value.hpp"
#include "twinwatch/harness/experiment.hpp"
#include "twinwatch/harness/replay.hpp"
#include "twinwatch/messages.hpp"
#include "twinwatch/monitors/lidar.hpp"
#include "twinwatch/monitors/monitors.hpp"
#include "twinwatch/sim/estimators.hpp"
#include "twinwatch/sim/geometry.hpp"
#include "twinwatch/sim/lidar_sim.hpp"
#include "twinwatch/sim/loop.hpp"
#include "twinwatch/sim/mission.hpp"
#include "twinwatch/sim/robot.hpp"
#include "twinwatch/sim/scenario.hpp"
#include "twinwatch/sim/world.hpp"
#include "twinwatch/stream/ast.hpp"
#include "twinwatch/stream/graph.hpp"
#include "twinwatch/stream/parser.hpp"
#include "twinwatch/stream/trace.hpp"
#include "twinwatch/twin/connector.hpp"
#include "twinwatch/twin/log.hpp"
#include "twinwatch/twin/mqtt_client.hpp"
#include "twinwatch/twin/service.hpp"
#include "twinwatch/twin/transport.hpp"
