#include "edpt/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace edpt {

int hardware_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void parallel_for(long begin, long end, int workers,
                  const std::function<void(long)>& fn) {
  const long count = end - begin;
  if (count <= 0) return;
  if (workers <= 0) workers = hardware_workers();
  if (workers > count) workers = static_cast<int>(count);
  if (workers == 1) {
    for (long i = begin; i < end; ++i) fn(i);
    return;
  }

  std::atomic<long> cursor{begin};
  std::exception_ptr error;
  std::mutex error_mutex;
  const long chunk = std::max(1L, count / (8L * workers));

  auto worker = [&]() {
    for (;;) {
      long lo = cursor.fetch_add(chunk);
      if (lo >= end) return;
      long hi = std::min(end, lo + chunk);
      try {
        for (long i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace edpt
