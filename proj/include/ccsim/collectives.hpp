// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ccsim/collectives/fused.hpp"
#include "ccsim/collectives/nvrar.hpp"
#include "ccsim/collectives/ring.hpp"
#include "ccsim/collectives/ring_schedule.hpp"
#include "ccsim/collectives/tree.hpp"
