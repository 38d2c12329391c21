#pragma once

#include <cstdint>
#include <exception>
#include <mutex>

namespace cmes {

// Serial runs the same per-item bodies in index order; results are identical either way
// because every item draws from its own random substream.
enum class Exec { Serial, Parallel };

template <class Body>
void parallel_for(Exec exec, std::int64_t n, Body&& body) {
  if (exec == Exec::Serial || n < 2) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

int max_threads();

}  // namespace cmes
