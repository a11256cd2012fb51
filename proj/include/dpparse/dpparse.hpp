#pragma once

#include "core.hpp"
#include "embedder.hpp"
#include "knn_index.hpp"
#include "density.hpp"
#include "dp_score.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "backends.hpp"
#include "trainer.hpp"
#include "metrics.hpp"
#include "synthgen.hpp"
#include "io.hpp"
#include "config.hpp"
