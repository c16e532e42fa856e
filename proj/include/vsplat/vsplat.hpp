#pragma once

#include "backprop.hpp"
#include "floater_pruner.hpp"
#include "formats.hpp"
#include "gradcheck.hpp"
#include "knn.hpp"
#include "losses_metrics.hpp"
#include "rasterizer.hpp"
#include "splat_model.hpp"
#include "synth_bench.hpp"
#include "trainer.hpp"
