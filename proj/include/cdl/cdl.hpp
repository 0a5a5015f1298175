/**
 * Copyright 2026 The CDL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "cdl/error.hpp"
#include "cdl/exec/executor.hpp"
#include "cdl/exec/spill.hpp"
#include "cdl/io/bytes.hpp"
#include "cdl/io/config.hpp"
#include "cdl/io/container.hpp"
#include "cdl/io/crypto.hpp"
#include "cdl/io/partition_blobs.hpp"
#include "cdl/io/weights.hpp"
#include "cdl/nn/kernels.hpp"
#include "cdl/nn/model.hpp"
#include "cdl/nn/reference.hpp"
#include "cdl/planner/manifest.hpp"
#include "cdl/planner/plan.hpp"
#include "cdl/planner/schemes.hpp"
#include "cdl/tee/arena.hpp"
#include "cdl/tee/ledger.hpp"
#include "cdl/tee/session.hpp"
#include "cdl/tee/shared_buffer.hpp"
#include "cdl/tee/taint.hpp"
