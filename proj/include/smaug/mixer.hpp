#pragma once

#include "smaug/mixer/mixing_net.hpp"
