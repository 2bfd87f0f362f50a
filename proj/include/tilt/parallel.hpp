#ifndef TILT_PARALLEL_HPP
#define TILT_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <utility>
#include <vector>

namespace tilt {

// Upper bound on worker threads used by chunked_reduce (0 = hardware concurrency).
void set_thread_cap(unsigned cap);
unsigned thread_cap();

// Fixed chunk count: results depend on it, never on the number of threads.
inline constexpr std::size_t kDefaultChunks = 64;

// Splits [0, total) into `chunks` contiguous ranges, evaluates fn(lo, hi) for
// each range (possibly concurrently) and folds the partials with a pairwise
// tree in index order. Bit-stable for a fixed chunk count.
template <class T, class Fn, class Combine>
T chunked_reduce(std::uint64_t total, Fn&& fn, Combine&& combine,
                 std::size_t chunks = kDefaultChunks) {
  chunks = static_cast<std::size_t>(std::max<std::uint64_t>(1, std::min<std::uint64_t>(chunks, total)));
  std::vector<T> partial(chunks);
  auto bounds = [&](std::size_t c) {
    return std::pair<std::uint64_t, std::uint64_t>{total * c / chunks, total * (c + 1) / chunks};
  };
  const unsigned workers = std::min<unsigned>(thread_cap(), static_cast<unsigned>(chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      auto [lo, hi] = bounds(c);
      partial[c] = fn(lo, hi);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c; (c = next.fetch_add(1)) < chunks;) {
          auto [lo, hi] = bounds(c);
          partial[c] = fn(lo, hi);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  while (partial.size() > 1) {
    std::vector<T> next_level;
    next_level.reserve((partial.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < partial.size(); i += 2)
      next_level.push_back(combine(std::move(partial[i]), std::move(partial[i + 1])));
    if (partial.size() % 2) next_level.push_back(std::move(partial.back()));
    partial = std::move(next_level);
  }
  return std::move(partial.front());
}

// Runs fn(i) for i in [0, count) across workers; fn writes its own output slot.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned workers = std::min<unsigned>(thread_cap(), static_cast<unsigned>(std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace tilt

#endif
