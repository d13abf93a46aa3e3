#pragma once
// Convenience header pulling in the whole library.

#include "harnacklab/entropy.hpp"
#include "harnacklab/errors.hpp"
#include "harnacklab/geometry.hpp"
#include "harnacklab/harnack.hpp"
#include "harnacklab/heat_family.hpp"
#include "harnacklab/oracles.hpp"
#include "harnacklab/path_action.hpp"
#include "harnacklab/ricci_flow.hpp"
#include "harnacklab/runner.hpp"
#include "harnacklab/scenario.hpp"
