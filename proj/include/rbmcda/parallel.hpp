#pragma once

#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rbmcda/gauss_kalman.hpp"

namespace rbmcda {

/// Number of OpenMP threads available (1 without OpenMP).
int max_threads();
void set_threads(int n);

/// Runs body(i) for i in [0, n). With `parallel` set (and not already inside
/// a parallel region) iterations are spread over OpenMP threads. Kalman calls
/// made by worker threads are credited to the calling thread, and the first
/// exception thrown by any iteration is rethrown after the loop.
template <class Body>
void parallel_for(int n, bool parallel, Body&& body) {
#ifdef _OPENMP
  if (parallel && n > 1 && !omp_in_parallel() && omp_get_max_threads() > 1) {
    std::exception_ptr error;
    std::mutex mu;
    KalmanCallCounter total;
#pragma omp parallel
    {
      const KalmanCallCounter start = detail::thread_kalman_counter();
#pragma omp for schedule(dynamic)
      for (int i = 0; i < n; ++i) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
      const KalmanCallCounter delta = detail::thread_kalman_counter() - start;
      detail::thread_kalman_counter() = start;
      std::lock_guard lock(mu);
      total += delta;
    }
    detail::thread_kalman_counter() += total;
    if (error) std::rethrow_exception(error);
    return;
  }
#endif
  for (int i = 0; i < n; ++i) body(i);
}

}  // namespace rbmcda
