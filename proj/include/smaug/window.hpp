#pragma once

#include "smaug/window/agent_network.hpp"
#include "smaug/window/attention_log.hpp"
#include "smaug/window/segments.hpp"
