#pragma once

#include "archive.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "model.hpp"
#include "newick.hpp"
#include "posterior.hpp"
#include "priors.hpp"
#include "rng.hpp"
#include "samplers.hpp"
#include "sim.hpp"
#include "split.hpp"
#include "tree.hpp"
#include "treespace.hpp"
#include "ultrametric.hpp"
#include "ultratree/report.hpp"
