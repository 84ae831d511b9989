#pragma once

#include "powerprice/analytic.hpp"
#include "powerprice/errors.hpp"
#include "powerprice/market_spec.hpp"
#include "powerprice/mc_engine.hpp"
#include "powerprice/philox.hpp"
#include "powerprice/pricer.hpp"
#include "powerprice/term_model.hpp"
