#pragma once

#include "util.hpp"
#include "normgeom.hpp"
#include "metric.hpp"
#include "content.hpp"
#include "tangent.hpp"
#include "perturb.hpp"
#include "converse.hpp"
#include "corpus.hpp"
#include "io.hpp"
