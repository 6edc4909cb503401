#pragma once

#include <cstddef>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qlt::par {

// Execution mode for the data-parallel kernels. The serial path is the
// reference implementation; the OpenMP path must produce bit-identical
// results (per-index writes only, no reductions inside the loop body).
enum class Mode { serial, openmp };

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

template <class F>
void for_index(std::size_t n, Mode mode, F&& f) {
#ifdef _OPENMP
    if (mode == Mode::openmp) {
        const long ln = static_cast<long>(n);
#pragma omp parallel for schedule(static)
        for (long i = 0; i < ln; ++i) f(static_cast<std::size_t>(i));
        return;
    }
#else
    (void)mode;
#endif
    for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace qlt::par
