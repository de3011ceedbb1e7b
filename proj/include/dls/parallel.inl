#pragma once

#include <exception>
#include <thread>
#include <vector>

namespace dls {

template <class Fn>
void parallel_ranges(std::size_t total, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || total <= 1) {
    if (total > 0) fn(std::size_t{0}, total);
    return;
  }
  const WorkPartition part = partition_work(total, workers);
  std::vector<std::exception_ptr> errors(part.counts.size());
  std::vector<std::thread> threads;
  threads.reserve(part.counts.size());
  for (std::size_t p = 0; p < part.counts.size(); ++p) {
    if (part.counts[p] == 0) continue;
    threads.emplace_back([&, p] {
      try {
        fn(part.starts[p], part.starts[p] + part.counts[p]);
      } catch (...) {
        errors[p] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  // Lowest failing range wins, independent of scheduling.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace dls
