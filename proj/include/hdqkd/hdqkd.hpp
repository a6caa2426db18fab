#pragma once

// Certified guessing-probability bounds and asymptotic key rates for
// high-dimensional time-bin QKD.

#include "hdqkd/core.hpp"
#include "hdqkd/spectra.hpp"
#include "hdqkd/density_matrix.hpp"
#include "hdqkd/measurement.hpp"
#include "hdqkd/completion.hpp"
#include "hdqkd/witness.hpp"
#include "hdqkd/nelder_mead.hpp"
#include "hdqkd/dual_solver.hpp"
#include "hdqkd/primal_oracle.hpp"
#include "hdqkd/keyrate.hpp"
#include "hdqkd/click_io.hpp"
#include "hdqkd/config.hpp"
#include "hdqkd/runner.hpp"
