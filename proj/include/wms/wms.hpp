#pragma once

// Everything at once. Prefer the per-module headers in library code.
#include "wms/core/distance.hpp"
#include "wms/core/error.hpp"
#include "wms/core/field.hpp"
#include "wms/core/io.hpp"
#include "wms/core/rng.hpp"
#include "wms/core/sparse.hpp"
#include "wms/eval/metrics.hpp"
#include "wms/harness/config.hpp"
#include "wms/harness/experiments.hpp"
#include "wms/harness/parallel.hpp"
#include "wms/harness/pipeline.hpp"
#include "wms/nn/checkpoint.hpp"
#include "wms/nn/gradcheck.hpp"
#include "wms/nn/loss.hpp"
#include "wms/nn/optim.hpp"
#include "wms/nn/tinynet.hpp"
#include "wms/pam/refine.hpp"
#include "wms/prompt/oracle.hpp"
#include "wms/sce/features.hpp"
#include "wms/sce/kmeans.hpp"
#include "wms/sce/subclass.hpp"
#include "wms/sce/train.hpp"
#include "wms/synth/dataset.hpp"
