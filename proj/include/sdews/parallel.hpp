/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace sdews {

// Trajectories per work unit; independent of the worker count.
inline constexpr std::uint64_t kBlockSize = 1024;

/// Number of workers to use for a request of `requested` (0 = all cores).
inline std::size_t resolve_workers(std::size_t requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Splits [0, n) into blocks of `block_size` and evaluates
/// fn(worker, begin, end) -> Partial for each block on `workers` threads.
/// Partials come back in block order. The exception from the lowest failing
/// block, if any, is rethrown after all workers stop.
template <class Partial, class Fn>
std::vector<Partial> run_blocks(std::uint64_t n, std::size_t workers, Fn&& fn,
                                std::uint64_t block_size = kBlockSize) {
  const std::uint64_t blocks = (n + block_size - 1) / block_size;
  std::vector<Partial> partials(blocks);
  workers = std::max<std::size_t>(
      1, std::min<std::uint64_t>(resolve_workers(workers), std::max<std::uint64_t>(blocks, 1)));

  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::uint64_t error_block = blocks;

  auto work = [&](std::size_t worker) {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::uint64_t b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= blocks) return;
      const std::uint64_t begin = b * block_size;
      const std::uint64_t end = std::min(n, begin + block_size);
      try {
        partials[b] = fn(worker, begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (b < error_block) {
          error_block = b;
          error = std::current_exception();
        }
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return partials;
}

/// Pairwise reduction with a shape fixed by items.size().
template <class T, class Merge>
T tree_reduce(std::vector<T> items, Merge&& merge) {
  if (items.empty()) return T{};
  std::size_t count = items.size();
  while (count > 1) {
    const std::size_t half = (count + 1) / 2;
    for (std::size_t i = 0; i < count / 2; ++i) {
      items[i] = merge(std::move(items[2 * i]), std::move(items[2 * i + 1]));
    }
    if (count % 2 == 1) items[count / 2] = std::move(items[count - 1]);
    count = half;
  }
  return std::move(items[0]);
}

}  // namespace sdews
