#pragma once

namespace mvlab {

/// Worker cap for particle-level loops. Results never depend on this value.
void set_thread_count(int n);
int thread_count();
int max_thread_count();

/// Reads MVLAB_THREADS from the environment, if set.
void apply_thread_env();

}  // namespace mvlab
