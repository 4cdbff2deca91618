#pragma once

#include <cstddef>
#include <functional>

namespace vmstab {

// Worker count used by parallel_for. Initialised from VMSTAB_THREADS, else 1.
int thread_count();
void set_thread_count(int n);

// Runs body(i) for i in [0, n). Each index is handled by exactly one worker and
// callers write only to slots owned by i, so results do not depend on the
// number of threads. The first exception (lowest index) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace vmstab
