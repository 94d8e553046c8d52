#pragma once

#include "mcra/error.hpp"
#include "mcra/utility.hpp"
#include "mcra/grouping.hpp"
#include "mcra/carrier_solver.hpp"
#include "mcra/staged_allocator.hpp"
#include "mcra/oracle.hpp"
#include "mcra/scenario.hpp"
#include "mcra/sweep.hpp"
