#pragma once

// Umbrella header.

#include "drtoll/design.hpp"
#include "drtoll/equilibrium.hpp"
#include "drtoll/error.hpp"
#include "drtoll/experiment.hpp"
#include "drtoll/io.hpp"
#include "drtoll/network.hpp"
#include "drtoll/optim/composite.hpp"
#include "drtoll/optim/linalg.hpp"
#include "drtoll/optim/lp.hpp"
#include "drtoll/optim/qp.hpp"
#include "drtoll/rng.hpp"
#include "drtoll/types.hpp"
#include "drtoll/uncertainty.hpp"
