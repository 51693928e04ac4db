#pragma once

#include "common.hpp"
#include "datagen.hpp"
#include "experiment.hpp"
#include "losses.hpp"
#include "network.hpp"
#include "perturb.hpp"
#include "plot.hpp"
#include "preprocess.hpp"
#include "prop1.hpp"
#include "riskeval.hpp"
#include "train.hpp"
