#pragma once

// COLMAP text ingestion, splat PLY interchange and PPM images.
#include "colmap.hpp"
#include "image.hpp"
#include "ply.hpp"
