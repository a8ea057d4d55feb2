#pragma once

namespace coad {

// Caps internal parallelism. n <= 0 leaves the library default.
void set_thread_limit(int n);
// Reads COAD_THREADS; returns the applied limit or 0 when unset.
int apply_thread_limit_from_env();

}  // namespace coad
