#pragma once

#include <advstl/autodiff.hpp>
#include <advstl/optim.hpp>
#include <advstl/policy.hpp>
#include <advstl/random.hpp>
#include <advstl/sim.hpp>
#include <advstl/stl.hpp>
#include <advstl/systems/baselines.hpp>
#include <advstl/systems/cartpole.hpp>
#include <advstl/systems/platoon.hpp>
#include <advstl/train.hpp>
#include <advstl/io/config.hpp>
#include <advstl/io/csv.hpp>
#include <advstl/io/formula_json.hpp>
#include <advstl/io/weights.hpp>
