// Copyright 2026 The viewalign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>

namespace viewalign {

/// Number of workers used when a caller passes 0.
int default_worker_count();

/// Runs body(begin, end) over contiguous chunks covering [0, n). Chunks are
/// handed out in order to at most `workers` threads; with one worker the
/// body runs inline. Exceptions from any chunk are rethrown after all
/// workers have joined.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body, int workers = 0);

}  // namespace viewalign
