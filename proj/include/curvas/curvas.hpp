// Copyright 2026 The curvas-eval Authors.
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

#ifndef CURVAS_CURVAS_HPP
#define CURVAS_CURVAS_HPP

#include "curvas/grid.hpp"
#include "curvas/nifti.hpp"
#include "curvas/dataset.hpp"
#include "curvas/metrics.hpp"
#include "curvas/consensus.hpp"
#include "curvas/vascular.hpp"
#include "curvas/ranking.hpp"
#include "curvas/phantom.hpp"
#include "curvas/harness.hpp"
#include "curvas/report.hpp"

#endif  // CURVAS_CURVAS_HPP
