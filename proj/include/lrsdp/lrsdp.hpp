#pragma once

#include "lrsdp/errors.hpp"
#include "lrsdp/matcore.hpp"
#include "lrsdp/random.hpp"
#include "lrsdp/objective.hpp"
#include "lrsdp/sensing.hpp"
#include "lrsdp/schedule.hpp"
#include "lrsdp/trace.hpp"
#include "lrsdp/solvers.hpp"
#include "lrsdp/initsch.hpp"
#include "lrsdp/theory.hpp"
#include "lrsdp/experiment.hpp"
