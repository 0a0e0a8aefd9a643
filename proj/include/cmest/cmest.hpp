#pragma once

#include "cmest/asymptotics.hpp"
#include "cmest/core.hpp"
#include "cmest/distributions.hpp"
#include "cmest/energy.hpp"
#include "cmest/experiments.hpp"
#include "cmest/geometry.hpp"
#include "cmest/losses.hpp"
#include "cmest/metric.hpp"
#include "cmest/qp.hpp"
#include "cmest/random.hpp"
#include "cmest/solver.hpp"
#include "cmest/ustat.hpp"
