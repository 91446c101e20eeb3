#ifndef MUPMU_MUPMU_HPP
#define MUPMU_MUPMU_HPP

#include "mupmu/error.hpp"
#include "mupmu/estimation.hpp"
#include "mupmu/grid.hpp"
#include "mupmu/moea.hpp"
#include "mupmu/pareto.hpp"
#include "mupmu/placement.hpp"
#include "mupmu/sensitivity.hpp"
#include "mupmu/validation.hpp"

#endif
