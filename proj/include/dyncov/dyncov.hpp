/*
   Copyright 2026 The dyncov Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include "dyncov/commands.hpp"
#include "dyncov/core_stats.hpp"
#include "dyncov/errors.hpp"
#include "dyncov/format.hpp"
#include "dyncov/honda.hpp"
#include "dyncov/hub.hpp"
#include "dyncov/ingest.hpp"
#include "dyncov/multiple_testing.hpp"
#include "dyncov/parallel.hpp"
#include "dyncov/random.hpp"
#include "dyncov/score.hpp"
#include "dyncov/sim.hpp"
#include "dyncov/types.hpp"
