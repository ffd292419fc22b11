#pragma once

#include "boil/acquisition.hpp"
#include "boil/augmentation.hpp"
#include "boil/config.hpp"
#include "boil/curve.hpp"
#include "boil/errors.hpp"
#include "boil/external_process.hpp"
#include "boil/gp.hpp"
#include "boil/kernel.hpp"
#include "boil/log.hpp"
#include "boil/logging.hpp"
#include "boil/objectives.hpp"
#include "boil/optimizer.hpp"
#include "boil/rng.hpp"
#include "boil/search_space.hpp"
#include "boil/stats.hpp"
#include "boil/transform_fit.hpp"
