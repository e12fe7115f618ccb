#pragma once

#include "proxgt/audit.hpp"
#include "proxgt/config.hpp"
#include "proxgt/consensus.hpp"
#include "proxgt/core.hpp"
#include "proxgt/errors.hpp"
#include "proxgt/estimators.hpp"
#include "proxgt/graph.hpp"
#include "proxgt/metrics.hpp"
#include "proxgt/problems.hpp"
#include "proxgt/prox.hpp"
#include "proxgt/rng.hpp"
