#pragma once

#include "lstm_mrac/core.hpp"
#include "lstm_mrac/regulator.hpp"
#include "lstm_mrac/plant.hpp"
#include "lstm_mrac/ann.hpp"
#include "lstm_mrac/robust.hpp"
#include "lstm_mrac/closed_loop.hpp"
#include "lstm_mrac/lstm.hpp"
#include "lstm_mrac/scenarios.hpp"
#include "lstm_mrac/pipeline.hpp"
#include "lstm_mrac/analysis.hpp"
#include "lstm_mrac/io.hpp"
#include "lstm_mrac/experiment.hpp"
