#pragma once

#include "smaug/env/chain.hpp"
#include "smaug/env/dec_pomdp.hpp"
#include "smaug/env/matrix_game.hpp"
#include "smaug/env/switching_goals.hpp"
#include "smaug/env/trace.hpp"
#include "smaug/env/vector_env.hpp"
