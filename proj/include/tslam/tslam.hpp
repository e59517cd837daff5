#pragma once

#include "tslam/core/error.hpp"
#include "tslam/core/parallel.hpp"
#include "tslam/core/random.hpp"
#include "tslam/core/raster.hpp"
#include "tslam/enhance/thermal_enhance.hpp"
#include "tslam/eval/depth_metrics.hpp"
#include "tslam/eval/report.hpp"
#include "tslam/eval/trajectory.hpp"
#include "tslam/geometry/camera.hpp"
#include "tslam/geometry/sampling.hpp"
#include "tslam/geometry/se3.hpp"
#include "tslam/geometry/warp.hpp"
#include "tslam/graph/g2o_io.hpp"
#include "tslam/graph/pose_graph.hpp"
#include "tslam/io/config.hpp"
#include "tslam/io/manifest.hpp"
#include "tslam/io/pgm.hpp"
#include "tslam/io/ply.hpp"
#include "tslam/loop/loop_closure.hpp"
#include "tslam/objective/losses.hpp"
#include "tslam/objective/objective.hpp"
#include "tslam/objective/ssim.hpp"
#include "tslam/odometry/direct_odometry.hpp"
#include "tslam/odometry/pyramid.hpp"
#include "tslam/pipeline/bench.hpp"
#include "tslam/pipeline/config.hpp"
#include "tslam/pipeline/pipeline.hpp"
#include "tslam/pipeline/synth_dataset.hpp"
#include "tslam/synth/scene.hpp"
#include "tslam/synth/sequence.hpp"
