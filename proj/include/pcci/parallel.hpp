#pragma once

#include <cstddef>
#include <exception>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pcci {

// Library-wide worker-thread cap. 0 means "use all hardware threads".
// Results never depend on this value: every parallel kernel either runs
// independent work items or combines partial results in a fixed order.
void set_max_threads(int n);
int max_threads();

namespace detail {

inline thread_local int parallel_depth = 0;

inline int resolved_threads() {
#ifdef _OPENMP
    int cap = max_threads();
    int hw = omp_get_max_threads();
    return cap > 0 ? (cap < hw ? cap : hw) : hw;
#else
    return 1;
#endif
}

}  // namespace detail

// Runs body(i) for i in [0, n). Uses OpenMP with a static schedule when more
// than one thread is available and we are not already inside a parallel_for
// (nested regions would oversubscribe the machine). The first exception thrown
// by any iteration, lowest index winning, is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    if (n == 0) return;
#ifdef _OPENMP
    const int threads = detail::resolved_threads();
    if (threads > 1 && detail::parallel_depth == 0 && n > 1) {
        std::exception_ptr error;
        std::size_t error_index = n;
#pragma omp parallel num_threads(threads)
        {
            detail::parallel_depth = 1;
#pragma omp for schedule(static)
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
                try {
                    body(static_cast<std::size_t>(i));
                } catch (...) {
#pragma omp critical(pcci_parallel_for_error)
                    {
                        if (static_cast<std::size_t>(i) < error_index) {
                            error_index = static_cast<std::size_t>(i);
                            error = std::current_exception();
                        }
                    }
                }
            }
            detail::parallel_depth = 0;
        }
        if (error) std::rethrow_exception(error);
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace pcci
