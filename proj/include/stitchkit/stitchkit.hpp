#pragma once

#include "stitchkit/camera.hpp"
#include "stitchkit/controller.hpp"
#include "stitchkit/error.hpp"
#include "stitchkit/geom.hpp"
#include "stitchkit/io.hpp"
#include "stitchkit/mask.hpp"
#include "stitchkit/needle.hpp"
#include "stitchkit/rng.hpp"
#include "stitchkit/scene.hpp"
#include "stitchkit/serialization.hpp"
#include "stitchkit/sim.hpp"
#include "stitchkit/wound.hpp"
