#pragma once

#include "stkde/baselines.hpp"
#include "stkde/commands.hpp"
#include "stkde/config.hpp"
#include "stkde/domain.hpp"
#include "stkde/error.hpp"
#include "stkde/evaluation.hpp"
#include "stkde/export.hpp"
#include "stkde/ingest.hpp"
#include "stkde/kernel.hpp"
#include "stkde/model_io.hpp"
#include "stkde/predictor.hpp"
#include "stkde/simulator.hpp"
#include "stkde/weight_estimation.hpp"
#include "stkde/weight_function.hpp"
