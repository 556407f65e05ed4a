#pragma once

#include "smaug/cli/commands.hpp"
#include "smaug/cli/config.hpp"
#include "smaug/cli/diagnostics.hpp"
#include "smaug/cli/gradcheck_suite.hpp"
