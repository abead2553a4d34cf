#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef HYPERKERN_HAVE_OPENMP
#include <omp.h>
#endif

namespace hyperkern {

// Global worker cap; 0 means "runtime default".
void set_max_threads(int n);
int max_threads();

// Runs body(i) for i in [begin, end). Exceptions thrown by any iteration are
// captured and the first one is rethrown on the calling thread.
template <class Body>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, Body&& body, bool dynamic = false) {
  std::exception_ptr first;
  std::mutex guard;
#ifdef HYPERKERN_HAVE_OPENMP
  const int threads = max_threads();
  if (dynamic) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::ptrdiff_t i = begin; i < end; ++i) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!first) first = std::current_exception();
      }
    }
  } else {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::ptrdiff_t i = begin; i < end; ++i) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!first) first = std::current_exception();
      }
    }
  }
#else
  (void)dynamic;
  for (std::ptrdiff_t i = begin; i < end; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!first) first = std::current_exception();
    }
  }
#endif
  if (first) std::rethrow_exception(first);
}

}  // namespace hyperkern
