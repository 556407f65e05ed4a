#pragma once

#include "smaug/trainer/collect.hpp"
#include "smaug/trainer/config.hpp"
#include "smaug/trainer/episode.hpp"
#include "smaug/trainer/learner.hpp"
#include "smaug/trainer/model.hpp"
#include "smaug/trainer/run.hpp"
