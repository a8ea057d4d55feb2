#include "coad/runtime.hpp"

#include <Eigen/Core>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "coad/error.hpp"

namespace coad {

void set_thread_limit(int n) {
  if (n <= 0) return;
  Eigen::setNbThreads(n);
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int apply_thread_limit_from_env() {
  const char* env = std::getenv("COAD_THREADS");
  if (!env || !*env) return 0;
  int n = 0;
  try {
    n = std::stoi(env);
  } catch (const std::exception&) {
    throw ConfigError(std::string("COAD_THREADS must be a positive integer, got '") + env + "'");
  }
  if (n <= 0) throw ConfigError(std::string("COAD_THREADS must be a positive integer, got '") + env + "'");
  set_thread_limit(n);
  return n;
}

}  // namespace coad
