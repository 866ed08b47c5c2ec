#pragma once

// Umbrella header.

#include "mdro/model.hpp"
#include "mdro/risk_duals.hpp"
#include "mdro/marginal_dro.hpp"
#include "mdro/variational.hpp"
#include "mdro/optimizer.hpp"
#include "mdro/datagen.hpp"
#include "mdro/evaluation.hpp"
#include "mdro/io.hpp"
#include "mdro/experiment.hpp"
#include "mdro/protocols.hpp"
