#pragma once

#include "cbi/verdict.hpp"
#include "cbi/numerics.hpp"
#include "cbi/mechanisms.hpp"
#include "cbi/mechanism_grammar.hpp"
#include "cbi/flow.hpp"
#include "cbi/classify.hpp"
#include "cbi/zeroset.hpp"
#include "cbi/random.hpp"
#include "cbi/cutout.hpp"
#include "cbi/stats.hpp"
#include "cbi/ou.hpp"
#include "cbi/report.hpp"
