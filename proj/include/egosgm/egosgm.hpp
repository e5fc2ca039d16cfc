// Umbrella header.
#pragma once

#include "egosgm/core.hpp"
#include "egosgm/eval.hpp"
#include "egosgm/fusion.hpp"
#include "egosgm/geometry.hpp"
#include "egosgm/io_kitti.hpp"
#include "egosgm/kv_file.hpp"
#include "egosgm/pipeline.hpp"
#include "egosgm/prediction.hpp"
#include "egosgm/runner.hpp"
#include "egosgm/sgm.hpp"
#include "egosgm/synth.hpp"
