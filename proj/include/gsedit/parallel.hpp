#pragma once

#include <functional>

namespace gsedit {

/// Worker count used by row-parallel loops. 0 means hardware concurrency.
void set_thread_count(int n);
int thread_count();

/// Runs body(i) for i in [0, n). Iterations must be independent; results may
/// not depend on which thread ran them.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace gsedit
