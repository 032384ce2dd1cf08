// Copyright 2026 The HSLiNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "hslinet/checkpoint.hpp"
#include "hslinet/dataio.hpp"
#include "hslinet/error.hpp"
#include "hslinet/hslc.hpp"
#include "hslinet/metrics.hpp"
#include "hslinet/model.hpp"
#include "hslinet/ops.hpp"
#include "hslinet/random.hpp"
#include "hslinet/tape.hpp"
#include "hslinet/tensor.hpp"
#include "hslinet/training.hpp"
#include "hslinet/gradcheck.hpp"
