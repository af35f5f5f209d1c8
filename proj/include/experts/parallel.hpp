#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace experts {

// Parallel kernels in this project follow one rule: workers fill disjoint
// slots of a preallocated buffer and any folding happens serially in index
// order afterwards, so results are byte-identical to the serial reference
// implementations regardless of thread count.

inline void set_worker_budget(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int worker_budget() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

template <typename Fn>
void parallel_for(int64_t n, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t i = 0; i < n; ++i) {
        fn(i);
    }
}

} // namespace experts
