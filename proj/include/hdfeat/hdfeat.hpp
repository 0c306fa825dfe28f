#pragma once

#include "hdfeat/config.hpp"
#include "hdfeat/encoders.hpp"
#include "hdfeat/error.hpp"
#include "hdfeat/fusion.hpp"
#include "hdfeat/hdft.hpp"
#include "hdfeat/imageio.hpp"
#include "hdfeat/projection.hpp"
#include "hdfeat/report.hpp"
#include "hdfeat/tensor.hpp"
#include "hdfeat/uhd.hpp"
