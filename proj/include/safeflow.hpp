#pragma once

#include "safeflow/barrier.hpp"
#include "safeflow/constraints.hpp"
#include "safeflow/core.hpp"
#include "safeflow/elm.hpp"
#include "safeflow/evaluation.hpp"
#include "safeflow/io.hpp"
#include "safeflow/learner.hpp"
#include "safeflow/qp.hpp"
#include "safeflow/simulator.hpp"
#include "safeflow/synthetic.hpp"
#include "safeflow/trajectory.hpp"
