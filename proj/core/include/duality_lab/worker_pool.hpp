#pragma once

#include <cstddef>
#include <functional>

namespace dlab {

/// Fixed-size fan-out helper. `parallel_for` runs fn(i) for i in [0, n) on up
/// to `jobs` threads; callers write results into slot i so the reduction
/// order never depends on scheduling.
class WorkerPool {
 public:
  explicit WorkerPool(int jobs = 1);

  int jobs() const noexcept { return jobs_; }

  /// Rethrows the exception of the lowest failing index after all tasks end.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) const;

 private:
  int jobs_;
};

}  // namespace dlab
