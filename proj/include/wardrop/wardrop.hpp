#pragma once

#include "assignment.hpp"
#include "common.hpp"
#include "congestion.hpp"
#include "continuum.hpp"
#include "direction_family.hpp"
#include "domain.hpp"
#include "dual.hpp"
#include "gencurves.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "longterm.hpp"
#include "lp.hpp"
#include "network.hpp"
#include "shortest_path.hpp"
#include "transport.hpp"
