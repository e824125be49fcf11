// Copyright 2026 The lgcn Authors
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

#include "lgcn/dataset.hpp"
#include "lgcn/diffusion.hpp"
#include "lgcn/eval.hpp"
#include "lgcn/graph.hpp"
#include "lgcn/model.hpp"
#include "lgcn/synthetic.hpp"
#include "lgcn/train.hpp"
