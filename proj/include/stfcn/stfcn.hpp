#pragma once

#include "stfcn/datapipe.hpp"
#include "stfcn/errors.hpp"
#include "stfcn/evalstats.hpp"
#include "stfcn/layers.hpp"
#include "stfcn/model.hpp"
#include "stfcn/region_models.hpp"
#include "stfcn/tensor.hpp"
#include "stfcn/training.hpp"
