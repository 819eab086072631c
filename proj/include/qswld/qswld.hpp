#pragma once

#include "qswld/csv.hpp"
#include "qswld/errors.hpp"
#include "qswld/graph.hpp"
#include "qswld/lindblad.hpp"
#include "qswld/linalg.hpp"
#include "qswld/parallel.hpp"
#include "qswld/random.hpp"
#include "qswld/tilt.hpp"
#include "qswld/trajectory.hpp"
