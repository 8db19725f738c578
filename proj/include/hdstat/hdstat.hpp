#pragma once

#include "hdstat/errors.hpp"
#include "hdstat/rng.hpp"
#include "hdstat/types.hpp"
#include "hdstat/model_gen.hpp"
#include "hdstat/shrinkage.hpp"
#include "hdstat/regression.hpp"
#include "hdstat/lasso.hpp"
#include "hdstat/state_evolution.hpp"
#include "hdstat/clique.hpp"
#include "hdstat/experiments/table.hpp"
#include "hdstat/experiments/svg.hpp"
#include "hdstat/experiments/config.hpp"
#include "hdstat/experiments/runner.hpp"
