// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hetfl {

/// True when the build carries OpenMP; threads > 1 falls back to the serial
/// path otherwise.
inline bool parallel_available() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

inline int hardware_workers() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Fork-join loop over independent work items. threads == 1 is the serial
/// reference path; threads == 0 lets OpenMP pick; anything else caps the
/// worker count. Work items must not share mutable state. Exceptions are
/// collected per index and the lowest-index one is rethrown after the join,
/// so failure behavior matches the serial path.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (count == 0) return;
    std::vector<std::exception_ptr> failures(count);

#ifdef _OPENMP
    if (threads != 1 && count > 1) {
        const int workers = threads == 0 ? omp_get_max_threads() : threads;
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
            try {
                fn(static_cast<std::size_t>(i));
            } catch (...) {
                failures[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    } else
#endif
    {
        (void)threads;
        for (std::size_t i = 0; i < count; ++i) {
            try {
                fn(i);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    }

    for (const std::exception_ptr& failure : failures)
        if (failure) std::rethrow_exception(failure);
}

}  // namespace hetfl
