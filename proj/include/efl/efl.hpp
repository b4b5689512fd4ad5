#pragma once

#include "efl/clustering.hpp"
#include "efl/data.hpp"
#include "efl/eigen.hpp"
#include "efl/error.hpp"
#include "efl/experiment.hpp"
#include "efl/federation.hpp"
#include "efl/kmeans.hpp"
#include "efl/matrix.hpp"
#include "efl/metrics.hpp"
#include "efl/model.hpp"
#include "efl/rng.hpp"
#include "efl/theory.hpp"
