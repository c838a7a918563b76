#pragma once

#include "cimpc/common.hpp"
#include "cimpc/model.hpp"
#include "cimpc/kinematics.hpp"
#include "cimpc/geometry.hpp"
#include "cimpc/contact.hpp"
#include "cimpc/cqdc.hpp"
#include "cimpc/cost.hpp"
#include "cimpc/ddp.hpp"
#include "cimpc/mpc.hpp"
#include "cimpc/compliant.hpp"
#include "cimpc/tracking.hpp"
#include "cimpc/sim.hpp"
#include "cimpc/closed_loop.hpp"
#include "cimpc/scenario.hpp"
#include "cimpc/metrics.hpp"
#include "cimpc/io.hpp"
#include "cimpc/experiments.hpp"
