// Copyright 2026 The kpitriage Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KPITRIAGE_KPITRIAGE_HPP_
#define KPITRIAGE_KPITRIAGE_HPP_

#include "kpitriage/core.hpp"
#include "kpitriage/forest.hpp"
#include "kpitriage/ingest.hpp"
#include "kpitriage/json_io.hpp"
#include "kpitriage/pipeline.hpp"
#include "kpitriage/prep.hpp"
#include "kpitriage/report.hpp"
#include "kpitriage/rules.hpp"
#include "kpitriage/synth.hpp"
#include "kpitriage/table.hpp"
#include "kpitriage/triage.hpp"

#endif  // KPITRIAGE_KPITRIAGE_HPP_
