#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace cbma {

template <typename Fn>
void parallel_for(Index n, int n_threads, Fn&& fn) {
  const Index workers = std::clamp<Index>(n_threads, 1, std::max<Index>(n, 1));
  if (workers <= 1) {
    fn(Index{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const Index chunk = (n + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index begin = std::min(n, w * chunk);
    const Index end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace cbma
