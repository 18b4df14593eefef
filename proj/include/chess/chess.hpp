// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chess/config.hpp"
#include "chess/cost_model.hpp"
#include "chess/errors.hpp"
#include "chess/kv_store.hpp"
#include "chess/matrix.hpp"
#include "chess/selector.hpp"
#include "chess/semantic_index.hpp"
#include "chess/simulator.hpp"
#include "chess/uncertainty.hpp"
#include "chess/workload.hpp"
