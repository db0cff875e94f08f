#pragma once

#include "fairstack/error.hpp"
#include "fairstack/linalg.hpp"
#include "fairstack/rng.hpp"
#include "fairstack/model.hpp"
#include "fairstack/agents.hpp"
#include "fairstack/objectives.hpp"
#include "fairstack/expression.hpp"
#include "fairstack/fairness.hpp"
#include "fairstack/projection.hpp"
#include "fairstack/solvers.hpp"
#include "fairstack/bounds.hpp"
#include "fairstack/experiments.hpp"
#include "fairstack/config.hpp"
#include "fairstack/cli.hpp"
