/******************************************************************************
 * Copyright 2026 The viinit Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#ifndef VIINIT_PARALLEL_HPP_
#define VIINIT_PARALLEL_HPP_

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace viinit {

/// Worker cap: hardware concurrency, clamped by the VIINIT_THREADS
/// environment variable when set.
inline int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("VIINIT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0 && cap < n) n = cap;
  }
  return n;
}

/// Runs fn(0..n-1) across worker threads. Results must be written to
/// index-addressed slots so that merge order never depends on scheduling.
/// fn must not throw; wrap exceptions into the slot.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace viinit

#endif  // VIINIT_PARALLEL_HPP_
