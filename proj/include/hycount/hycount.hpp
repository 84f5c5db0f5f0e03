#pragma once

#include "hycount/annotations.hpp"
#include "hycount/backend.hpp"
#include "hycount/density.hpp"
#include "hycount/density_io.hpp"
#include "hycount/errors.hpp"
#include "hycount/geometry.hpp"
#include "hycount/hybrid.hpp"
#include "hycount/metrics.hpp"
#include "hycount/nms.hpp"
#include "hycount/replay.hpp"
#include "hycount/report.hpp"
#include "hycount/scene.hpp"
#include "hycount/sweeps.hpp"
#include "hycount/synthetic.hpp"
#include "hycount/synthgen.hpp"
#include "hycount/tiling.hpp"
