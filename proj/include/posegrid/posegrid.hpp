#pragma once

#include "posegrid/angles.hpp"
#include "posegrid/camera.hpp"
#include "posegrid/cli.hpp"
#include "posegrid/codecs.hpp"
#include "posegrid/error.hpp"
#include "posegrid/eval.hpp"
#include "posegrid/geometry.hpp"
#include "posegrid/io.hpp"
#include "posegrid/loss.hpp"
#include "posegrid/parallel.hpp"
#include "posegrid/postprocess.hpp"
#include "posegrid/scenegen.hpp"
