#pragma once

// Bootstrap inference on the rank of an estimated matrix: the phi_r
// statistic and its directional derivatives, resampling schemes, the
// CF-A / CF-N / CF-T bootstrap tests with KP and RS references, sequential
// rank estimators, and a deterministic Monte Carlo laboratory.

#include "rankinfer/chi_squared.hpp"
#include "rankinfer/derivatives.hpp"
#include "rankinfer/errors.hpp"
#include "rankinfer/parallel.hpp"
#include "rankinfer/rank_estimation.hpp"
#include "rankinfer/rank_tests.hpp"
#include "rankinfer/resampling.hpp"
#include "rankinfer/rng.hpp"
#include "rankinfer/sim_lab.hpp"
#include "rankinfer/spectral.hpp"
