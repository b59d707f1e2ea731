#pragma once

#include "tinscale/core.hpp"
#include "tinscale/delaunay.hpp"
#include "tinscale/eval.hpp"
#include "tinscale/io.hpp"
#include "tinscale/morse.hpp"
#include "tinscale/pipeline.hpp"
#include "tinscale/pointcloud.hpp"
#include "tinscale/predicates.hpp"
#include "tinscale/smoothing.hpp"
#include "tinscale/synthetic.hpp"
#include "tinscale/tin.hpp"
#include "tinscale/tracking.hpp"
