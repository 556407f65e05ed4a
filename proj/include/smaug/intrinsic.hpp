#pragma once

#include "smaug/intrinsic/mi_audit.hpp"
#include "smaug/intrinsic/variational.hpp"
