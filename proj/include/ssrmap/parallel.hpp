#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssrmap {

/// Worker count for an OpenMP region; non-positive requests use the runtime default.
inline int resolve_workers(int requested) noexcept {
    if (requested > 0) return requested;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace ssrmap
