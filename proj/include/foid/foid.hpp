#pragma once

// Umbrella header.

#include "foid/acflow.hpp"
#include "foid/dispatch.hpp"
#include "foid/error.hpp"
#include "foid/harness.hpp"
#include "foid/inverter.hpp"
#include "foid/linflow.hpp"
#include "foid/netmodel.hpp"
#include "foid/network_io.hpp"
#include "foid/qcqp.hpp"
