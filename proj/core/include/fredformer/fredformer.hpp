#pragma once

#include "fredformer/attention.hpp"
#include "fredformer/checkpoint.hpp"
#include "fredformer/data.hpp"
#include "fredformer/error.hpp"
#include "fredformer/model.hpp"
#include "fredformer/series.hpp"
#include "fredformer/spectral.hpp"
#include "fredformer/synthgen.hpp"
#include "fredformer/train.hpp"
