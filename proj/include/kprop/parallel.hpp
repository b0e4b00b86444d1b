#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace kprop {

/// Runs body(begin, end, worker) over contiguous chunks of [0, count).
/// Chunks are disjoint, so bodies that write only their own indices produce
/// results independent of the worker count.
template <class Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers <= 1) {
    body(std::size_t{0}, count, std::size_t{0});
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::jthread> threads;
  threads.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = std::min(count, w * chunk);
    const std::size_t end = std::min(count, begin + chunk);
    threads.emplace_back([&body, begin, end, w] { body(begin, end, w); });
  }
  body(std::size_t{0}, std::min(count, chunk), std::size_t{0});
}

}  // namespace kprop
