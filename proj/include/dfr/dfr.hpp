#pragma once

#include "dfr/backprop.hpp"
#include "dfr/dataset.hpp"
#include "dfr/dprr.hpp"
#include "dfr/error.hpp"
#include "dfr/gridsearch.hpp"
#include "dfr/head.hpp"
#include "dfr/io.hpp"
#include "dfr/report.hpp"
#include "dfr/reservoir.hpp"
#include "dfr/rng.hpp"
#include "dfr/trainer.hpp"
