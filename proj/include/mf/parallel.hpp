#ifndef MF_PARALLEL_HPP
#define MF_PARALLEL_HPP

#include <functional>

namespace mf {

// Worker count for `jobs` independent tasks: the hardware thread count,
// overridden by the MF_THREADS environment variable when it parses to a
// positive integer, never more than jobs and never less than one.
int worker_count(int jobs);

// Runs fn(0..jobs-1) on a worker pool (inline when one worker suffices).
// Tasks must be independent; outputs belong in pre-sized per-index slots.
// The first exception thrown by a task is rethrown after all workers join.
void parallel_for_index(int jobs, const std::function<void(int)>& fn);

}  // namespace mf

#endif  // MF_PARALLEL_HPP
