#pragma once

#include "bezier.hpp"
#include "chain.hpp"
#include "error.hpp"
#include "lane_builder.hpp"
#include "metrics.hpp"
#include "polyline.hpp"
#include "scene.hpp"
#include "vec3.hpp"
