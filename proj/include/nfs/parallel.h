/*
 * Copyright 2026 The NFS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef NFS_PARALLEL_H_
#define NFS_PARALLEL_H_

#include <cstddef>
#include <exception>
#include <vector>

namespace nfs {

// Selects between the OpenMP kernel and the serial reference kept for
// testing. Both paths produce bit-identical results.
enum class Execution { kSerial, kParallel };

// Caps the number of OpenMP workers; values <= 0 restore the default.
void SetNumThreads(int threads);
int MaxThreads();

// Runs body(i) for i in [0, n). Iterations must write to disjoint outputs;
// the first exception (lowest index) is rethrown after the loop.
template <typename Body>
void ParallelFor(std::size_t n, Execution execution, Body&& body) {
  if (execution == Execution::kSerial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace nfs

#endif  // NFS_PARALLEL_H_
