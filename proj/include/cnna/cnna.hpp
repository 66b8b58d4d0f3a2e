/*
 * Copyright 2026 The CNNA Simulator Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "cnna/accel/cnna.hpp"
#include "cnna/dse.hpp"
#include "cnna/error.hpp"
#include "cnna/fxp.hpp"
#include "cnna/model.hpp"
#include "cnna/oracle.hpp"
#include "cnna/qtrain.hpp"
#include "cnna/scheduler.hpp"
#include "cnna/tensor.hpp"
#include "cnna/weights.hpp"
