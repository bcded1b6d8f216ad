#pragma once

#include "coalition/calibration.hpp"
#include "coalition/characteristic_oracle.hpp"
#include "coalition/cli_runner.hpp"
#include "coalition/election_model.hpp"
#include "coalition/errors.hpp"
#include "coalition/fairness_optimizer.hpp"
#include "coalition/golden_section.hpp"
#include "coalition/io.hpp"
#include "coalition/monte_carlo.hpp"
#include "coalition/pde_solver.hpp"
#include "coalition/philox.hpp"
