#pragma once

// Umbrella header: the whole calibration, rectification and refinement
// toolkit. Individual headers stay usable on their own for faster builds.

#include "lfcal/types.hpp"

#include "lfcal/distortion.hpp"
#include "lfcal/projection.hpp"
#include "lfcal/rotation.hpp"

#include "lfcal/fundamental.hpp"
#include "lfcal/homography.hpp"
#include "lfcal/triangulation.hpp"

#include "lfcal/calibrate.hpp"
#include "lfcal/pattern.hpp"

#include "lfcal/image.hpp"
#include "lfcal/rectify.hpp"

#include "lfcal/refine.hpp"
#include "lfcal/tracks.hpp"

#include "lfcal/sweep.hpp"
#include "lfcal/synthetic.hpp"

#include "lfcal/depth.hpp"
#include "lfcal/io.hpp"
