#pragma once

#include "tcc/autodiff.hpp"
#include "tcc/checkpoint.hpp"
#include "tcc/color.hpp"
#include "tcc/config.hpp"
#include "tcc/data.hpp"
#include "tcc/dataset_io.hpp"
#include "tcc/evaluation.hpp"
#include "tcc/image_ops.hpp"
#include "tcc/log.hpp"
#include "tcc/losses.hpp"
#include "tcc/models.hpp"
#include "tcc/nn.hpp"
#include "tcc/optim.hpp"
#include "tcc/stats.hpp"
#include "tcc/train.hpp"
