#include "hyperkern/error.hpp"
#include "hyperkern/parallel.hpp"

#include <atomic>

namespace hyperkern {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::UnsupportedEvaluation: return "UnsupportedEvaluation";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::ResourceLimit: return "ResourceLimit";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::PipelineFailure: return "PipelineFailure";
    case ErrorKind::SlopeUndefined: return "SlopeUndefined";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Error";
}

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) {
  g_max_threads.store(n < 0 ? 0 : n);
#ifdef HYPERKERN_HAVE_OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

int max_threads() {
  const int n = g_max_threads.load();
  if (n > 0) return n;
#ifdef HYPERKERN_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace hyperkern
