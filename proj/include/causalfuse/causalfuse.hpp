#pragma once

#include "causalfuse/error.hpp"
#include "causalfuse/rng.hpp"
#include "causalfuse/filters.hpp"
#include "causalfuse/tensor.hpp"
#include "causalfuse/param_store.hpp"
#include "causalfuse/image.hpp"
#include "causalfuse/matrix.hpp"
#include "causalfuse/scenegen.hpp"
#include "causalfuse/confounder.hpp"
#include "causalfuse/baffm.hpp"
#include "causalfuse/fusionnet.hpp"
#include "causalfuse/training.hpp"
#include "causalfuse/metrics.hpp"
#include "causalfuse/checkpoint.hpp"
#include "causalfuse/corpus.hpp"
