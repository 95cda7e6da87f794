#pragma once

#include "dde/compartments.hpp"
#include "dde/data.hpp"
#include "dde/effect_net.hpp"
#include "dde/errors.hpp"
#include "dde/fit_io.hpp"
#include "dde/gradients.hpp"
#include "dde/integrator.hpp"
#include "dde/loss.hpp"
#include "dde/metrics.hpp"
#include "dde/optim.hpp"
#include "dde/training.hpp"
