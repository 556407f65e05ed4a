#pragma once

#include "smaug/worldmodel/inference_net.hpp"
#include "smaug/worldmodel/rollout.hpp"
