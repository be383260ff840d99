#pragma once

#include <cstddef>
#include <functional>

namespace gpc {

/// Worker count: hardware concurrency, capped by the GPC_THREADS environment
/// variable when it holds a positive integer.
std::size_t thread_budget();

/// Runs fn(0..n-1) across up to thread_budget() threads. fn must only write
/// to slots owned by its index. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gpc
