#pragma once

// Minimal fork-join loop. Work item i always writes to its own slot, so the
// result never depends on the thread count.

#include <cstddef>
#include <functional>

namespace tensoria {

// 0 means hardware concurrency
void set_num_threads(std::size_t n);
[[nodiscard]] std::size_t num_threads();

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace tensoria
