#pragma once

#include "divnet/bayes.hpp"
#include "divnet/error.hpp"
#include "divnet/harness.hpp"
#include "divnet/mrf.hpp"
#include "divnet/netmodel.hpp"
#include "divnet/parallel.hpp"
#include "divnet/random.hpp"
#include "divnet/scenario.hpp"
#include "divnet/sim.hpp"
#include "divnet/similarity.hpp"
