#ifndef MPPGEO_PARALLEL_HPP
#define MPPGEO_PARALLEL_HPP

#include <functional>

namespace mppgeo {

/// Worker count: hardware concurrency capped by MPPGEO_THREADS when set.
int thread_count();

/// Runs body(i) for i in [0, n). Each index is handled exactly once, and
/// results must be written to index-owned slots so output is independent of
/// scheduling. The exception of the lowest failing index is rethrown.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace mppgeo

#endif  // MPPGEO_PARALLEL_HPP
