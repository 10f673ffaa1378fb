#pragma once

#include "prescript/core.hpp"
#include "prescript/cost.hpp"
#include "prescript/dataset.hpp"
#include "prescript/experiments/benchmark.hpp"
#include "prescript/experiments/consistency.hpp"
#include "prescript/experiments/dosing.hpp"
#include "prescript/experiments/pricing.hpp"
#include "prescript/honest_forest.hpp"
#include "prescript/honest_tree.hpp"
#include "prescript/linear.hpp"
#include "prescript/objective.hpp"
#include "prescript/optimize.hpp"
#include "prescript/prescriber.hpp"
#include "prescript/stats.hpp"
#include "prescript/theory.hpp"
#include "prescript/tuning.hpp"
#include "prescript/weights.hpp"
