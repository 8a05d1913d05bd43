#pragma once

// Umbrella header for the ptree library: Bayesian density estimation on
// dyadic partition trees, with data-dependent (median-split) trees fitted by
// partial likelihood alongside the classical fixed midpoint trees.

#include "ptree/base_measure.hpp"
#include "ptree/csv.hpp"
#include "ptree/dataset.hpp"
#include "ptree/densities.hpp"
#include "ptree/errors.hpp"
#include "ptree/fit.hpp"
#include "ptree/grid.hpp"
#include "ptree/latent.hpp"
#include "ptree/model_io.hpp"
#include "ptree/mv_opt.hpp"
#include "ptree/numeric.hpp"
#include "ptree/partition.hpp"
#include "ptree/pt_kernel.hpp"
#include "ptree/risk.hpp"
#include "ptree/rng.hpp"
