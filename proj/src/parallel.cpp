#include "mvlab/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

namespace mvlab {

void set_thread_count(int n) { omp_set_num_threads(std::max(1, n)); }

int thread_count() { return omp_get_max_threads(); }

int max_thread_count() { return std::max(1, omp_get_num_procs()); }

void apply_thread_env() {
  if (const char* env = std::getenv("MVLAB_THREADS")) {
    try {
      set_thread_count(std::stoi(env));
    } catch (...) {
      // ignore malformed values
    }
  }
}

}  // namespace mvlab
