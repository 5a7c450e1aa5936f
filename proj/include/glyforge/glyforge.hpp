// Copyright 2026 The Glyforge Authors
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

// Convenience header pulling in the whole library.

#ifndef GLYFORGE_GLYFORGE_HPP_
#define GLYFORGE_GLYFORGE_HPP_

#include "glyforge/benchkit.hpp"
#include "glyforge/checkpoint.hpp"
#include "glyforge/datakit.hpp"
#include "glyforge/encoder.hpp"
#include "glyforge/error.hpp"
#include "glyforge/gradcheck.hpp"
#include "glyforge/io.hpp"
#include "glyforge/metrics.hpp"
#include "glyforge/nn.hpp"
#include "glyforge/notation.hpp"
#include "glyforge/pretrain.hpp"
#include "glyforge/rng.hpp"
#include "glyforge/structgraph.hpp"
#include "glyforge/tasks.hpp"
#include "glyforge/templates.hpp"
#include "glyforge/tensor.hpp"
#include "glyforge/util.hpp"

#endif  // GLYFORGE_GLYFORGE_HPP_
