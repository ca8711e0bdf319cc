// Umbrella header for the Delaunay density diagnostic library.
#pragma once

#include "ddd/errors.hpp"
#include "ddd/point_set.hpp"
#include "ddd/geometry.hpp"
#include "ddd/gradient.hpp"
#include "ddd/random.hpp"
#include "ddd/stats.hpp"
#include "ddd/sampling.hpp"
#include "ddd/testbed.hpp"
#include "ddd/diagnostic.hpp"
