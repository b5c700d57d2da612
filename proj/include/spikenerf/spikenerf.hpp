#pragma once

#include "checkpoint.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "energy.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "image.hpp"
#include "metrics.hpp"
#include "pack.hpp"
#include "png_io.hpp"
#include "procedural.hpp"
#include "rays.hpp"
#include "render.hpp"
#include "snn.hpp"
#include "train.hpp"
