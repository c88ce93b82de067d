#pragma once

#include "lacl/numcore/error.hpp"
#include "lacl/numcore/gradcheck.hpp"
#include "lacl/numcore/kernels.hpp"
#include "lacl/numcore/ops.hpp"
#include "lacl/numcore/random.hpp"
#include "lacl/numcore/tape.hpp"
#include "lacl/numcore/tensor.hpp"
