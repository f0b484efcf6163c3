#include "laminaire/core.hpp"

#include <atomic>
#include <mutex>

namespace lam {

void parallel_blocks(std::size_t n, std::size_t n_blocks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (n_blocks > n) n_blocks = n;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  unsigned workers = g_thread_cap > 0 ? static_cast<unsigned>(g_thread_cap) : hw;
  if (workers > n_blocks) workers = static_cast<unsigned>(n_blocks);

  const std::size_t per = n / n_blocks, rem = n % n_blocks;
  auto span = [&](std::size_t b) {
    const std::size_t lo = b * per + std::min(b, rem);
    return std::pair<std::size_t, std::size_t>{lo, lo + per + (b < rem ? 1 : 0)};
  };

  if (workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) {
      auto [lo, hi] = span(b);
      fn(b, lo, hi);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t b = next.fetch_add(1);
        if (b >= n_blocks) return;
        auto [lo, hi] = span(b);
        try {
          fn(b, lo, hi);
        } catch (...) {
          std::lock_guard<std::mutex> g(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace lam
