#pragma once

#include "virodyne/channel.hpp"
#include "virodyne/config.hpp"
#include "virodyne/core.hpp"
#include "virodyne/detection.hpp"
#include "virodyne/epidemic.hpp"
#include "virodyne/error.hpp"
#include "virodyne/fd_solver.hpp"
#include "virodyne/genetic_code.hpp"
#include "virodyne/localization.hpp"
#include "virodyne/mobility.hpp"
#include "virodyne/mutation.hpp"
#include "virodyne/quadrature.hpp"
#include "virodyne/rng.hpp"
#include "virodyne/seqstat.hpp"
#include "virodyne/trajectory.hpp"
