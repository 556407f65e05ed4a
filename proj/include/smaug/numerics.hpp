#pragma once

#include "smaug/numerics/checkpoint.hpp"
#include "smaug/numerics/gradcheck.hpp"
#include "smaug/numerics/layers.hpp"
#include "smaug/numerics/ops.hpp"
#include "smaug/numerics/optim.hpp"
#include "smaug/numerics/tape.hpp"
#include "smaug/numerics/tensor.hpp"
