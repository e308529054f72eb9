#pragma once

#include "poplab/grid.hpp"
#include "poplab/operators.hpp"
#include "poplab/rates.hpp"
#include "poplab/windows.hpp"
#include "poplab/validate.hpp"
#include "poplab/forward.hpp"
#include "poplab/adjoint.hpp"
#include "poplab/hum.hpp"
#include "poplab/fixpoint.hpp"
#include "poplab/obslab.hpp"
#include "poplab/scenario.hpp"
#include "poplab/harness.hpp"
