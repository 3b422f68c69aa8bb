#pragma once

#include <cstdint>
#include <vector>

#ifdef DESCENTE_HAVE_OPENMP
#include <omp.h>
#endif

namespace descente::par {

// Execution mode for the exhaustive-check kernels.  Serial is the reference
// implementation; OpenMP must produce bit-identical results for every kernel
// (the benchmark and the law suite assert this).
enum class Mode { Serial, OpenMP };

Mode mode();
void set_mode(Mode m);
int max_threads();

// Smallest i in [0, n) with ok(i) == false, or -1 when all pass.  The
// predicate must be pure and must not throw.
template <typename Pred>
int64_t first_failure(int64_t n, Pred&& ok) {
#ifdef DESCENTE_HAVE_OPENMP
  if (mode() == Mode::OpenMP && n > 64) {
    int64_t found = n;
#pragma omp parallel for schedule(static) reduction(min : found)
    for (int64_t i = 0; i < n; ++i) {
      if (!ok(i)) found = found < i ? found : i;
    }
    return found == n ? -1 : found;
  }
#endif
  for (int64_t i = 0; i < n; ++i)
    if (!ok(i)) return i;
  return -1;
}

template <typename Pred>
bool all_of(int64_t n, Pred&& ok) {
  return first_failure(n, ok) == -1;
}

// Indices in [0, n) accepted by pred, in increasing order.
template <typename Pred>
std::vector<int64_t> matching(int64_t n, Pred&& pred) {
  std::vector<char> hit(static_cast<size_t>(n), 0);
#ifdef DESCENTE_HAVE_OPENMP
  if (mode() == Mode::OpenMP && n > 64) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) hit[static_cast<size_t>(i)] = pred(i) ? 1 : 0;
  } else {
    for (int64_t i = 0; i < n; ++i) hit[static_cast<size_t>(i)] = pred(i) ? 1 : 0;
  }
#else
  for (int64_t i = 0; i < n; ++i) hit[static_cast<size_t>(i)] = pred(i) ? 1 : 0;
#endif
  std::vector<int64_t> out;
  for (int64_t i = 0; i < n; ++i)
    if (hit[static_cast<size_t>(i)]) out.push_back(i);
  return out;
}

// Fills out[i] = f(i); slots are independent, so the order of evaluation
// does not affect the result.
template <typename T, typename Fn>
void fill(std::vector<T>& out, Fn&& f) {
  const int64_t n = static_cast<int64_t>(out.size());
#ifdef DESCENTE_HAVE_OPENMP
  if (mode() == Mode::OpenMP && n > 64) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = f(i);
    return;
  }
#endif
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = f(i);
}

}  // namespace descente::par
