#pragma once

// Umbrella header: finite-state distributionally robust Markov decision
// toolkit with Wasserstein ambiguity balls.

#include "drmdp/cost.hpp"
#include "drmdp/dp.hpp"
#include "drmdp/dual.hpp"
#include "drmdp/envs.hpp"
#include "drmdp/io.hpp"
#include "drmdp/lp.hpp"
#include "drmdp/mdp.hpp"
#include "drmdp/qlearn.hpp"
#include "drmdp/rng.hpp"
#include "drmdp/wasserstein.hpp"
