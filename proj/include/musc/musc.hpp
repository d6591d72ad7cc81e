#pragma once

#include "config.hpp"
#include "cpb.hpp"
#include "fitter.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "multimode.hpp"
#include "optimize.hpp"
#include "parallel.hpp"
#include "spectrum.hpp"
#include "units.hpp"
