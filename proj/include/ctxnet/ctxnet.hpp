#pragma once

#include "ctxnet/autodiff.hpp"
#include "ctxnet/checkpoint.hpp"
#include "ctxnet/context_layers.hpp"
#include "ctxnet/dataset.hpp"
#include "ctxnet/error.hpp"
#include "ctxnet/kdtree.hpp"
#include "ctxnet/kvconfig.hpp"
#include "ctxnet/metrics.hpp"
#include "ctxnet/network.hpp"
#include "ctxnet/optimizer.hpp"
#include "ctxnet/pointcloud.hpp"
#include "ctxnet/rng.hpp"
#include "ctxnet/training.hpp"
