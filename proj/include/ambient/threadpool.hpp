// Copyright 2026 The Ambient Depth Authors.
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

#ifndef AMBIENT_THREADPOOL_HPP_
#define AMBIENT_THREADPOOL_HPP_

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace ambient {

// Process-wide worker count. 0 means "not set"; callers fall back to 1.
// The CLI sets this from --jobs. Every parallel_for partition writes to
// disjoint indices, so results are identical for any job count.
inline int& global_jobs() {
  static int jobs = 1;
  return jobs;
}

// Runs fn(i) for i in [begin, end). Work is split into contiguous chunks,
// one per worker; fn must only touch state owned by index i.
inline void parallel_for(int64_t begin, int64_t end,
                         const std::function<void(int64_t)>& fn,
                         int jobs = 0) {
  if (jobs <= 0) jobs = global_jobs();
  int64_t n = end - begin;
  if (n <= 0) return;
  jobs = static_cast<int>(std::min<int64_t>(jobs, n));
  if (jobs <= 1) {
    for (int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  int64_t chunk = (n + jobs - 1) / jobs;
  for (int t = 0; t < jobs; ++t) {
    int64_t lo = begin + t * chunk;
    int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([lo, hi, &fn] {
      for (int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace ambient

#endif  // AMBIENT_THREADPOOL_HPP_
