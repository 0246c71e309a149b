#pragma once

#include "wchaos/error.hpp"
#include "wchaos/random.hpp"
#include "wchaos/wiener_core.hpp"
#include "wchaos/chaos_algebra.hpp"
#include "wchaos/hermite_driver.hpp"
#include "wchaos/young_integral.hpp"
#include "wchaos/sde_engine.hpp"
#include "wchaos/malliavin_engine.hpp"
#include "wchaos/density_lab.hpp"
