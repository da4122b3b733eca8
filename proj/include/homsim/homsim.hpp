#pragma once

#include "homsim/analysis.hpp"
#include "homsim/config.hpp"
#include "homsim/errors.hpp"
#include "homsim/event_sim.hpp"
#include "homsim/feedback.hpp"
#include "homsim/interference.hpp"
#include "homsim/io.hpp"
#include "homsim/photon_model.hpp"
#include "homsim/quadrature.hpp"
