#pragma once

#include "lorentz_ci/error.hpp"
#include "lorentz_ci/minkowski.hpp"
#include "lorentz_ci/bessel.hpp"
#include "lorentz_ci/metric_grid.hpp"
#include "lorentz_ci/defect.hpp"
#include "lorentz_ci/corrugation.hpp"
#include "lorentz_ci/moduli.hpp"
#include "lorentz_ci/hull.hpp"
#include "lorentz_ci/rigidity.hpp"
#include "lorentz_ci/io.hpp"
#include "lorentz_ci/config.hpp"
