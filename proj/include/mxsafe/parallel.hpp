// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace mxsafe {

/// Worker count from MXSAFE_THREADS; 0 or unset means hardware concurrency.
unsigned thread_count();

/// Runs fn(i) for i in [0, n). Each index must write disjoint state, so the
/// result never depends on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mxsafe
