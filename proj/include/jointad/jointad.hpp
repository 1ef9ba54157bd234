/*
 * Copyright 2026 The jointad Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "jointad/rng.hpp"
#include "jointad/distributions.hpp"
#include "jointad/market.hpp"
#include "jointad/outcome.hpp"
#include "jointad/optimal_mechanism.hpp"
#include "jointad/vcg.hpp"
#include "jointad/autodiff.hpp"
#include "jointad/mlp.hpp"
#include "jointad/bundlenet.hpp"
#include "jointad/training.hpp"
#include "jointad/evaluation.hpp"
#include "jointad/config.hpp"
#include "jointad/runtime.hpp"
#include "jointad/selfcheck.hpp"
