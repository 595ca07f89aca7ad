#pragma once

#include <lunarsfs/error.hpp>
#include <lunarsfs/geometry_prep.hpp>
#include <lunarsfs/metrics.hpp>
#include <lunarsfs/photometry.hpp>
#include <lunarsfs/pipeline.hpp>
#include <lunarsfs/raster.hpp>
#include <lunarsfs/sfs_solver.hpp>
#include <lunarsfs/sweep.hpp>
#include <lunarsfs/terrain_synth.hpp>
#include <lunarsfs/tiling.hpp>
