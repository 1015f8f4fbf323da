#pragma once

#include <functional>

namespace stormfield {

/// Run body(begin, end) over a static partition of [0, count) on up to
/// `threads` workers. Callers must make each index's work independent of
/// the partition so results do not depend on the worker count.
void parallel_for(int count, int threads, const std::function<void(int, int)>& body);

}  // namespace stormfield
