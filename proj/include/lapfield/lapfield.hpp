#pragma once

// Everything except io.hpp, which needs the vendored JSON header.

#include "lapfield/covariance.hpp"
#include "lapfield/distributions.hpp"
#include "lapfield/error.hpp"
#include "lapfield/exceedance.hpp"
#include "lapfield/inference.hpp"
#include "lapfield/laplace_field.hpp"
#include "lapfield/linalg.hpp"
#include "lapfield/mvn.hpp"
#include "lapfield/optim.hpp"
#include "lapfield/parallel.hpp"
#include "lapfield/quadrature.hpp"
#include "lapfield/random.hpp"
#include "lapfield/risk.hpp"
#include "lapfield/special.hpp"
#include "lapfield/tail.hpp"
