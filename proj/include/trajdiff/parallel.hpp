#pragma once

#include <functional>

namespace trajdiff {

// Runs fn over [0, n_items) split into n_chunks contiguous ranges, possibly
// concurrently. The partition depends only on (n_items, n_chunks), never on
// hardware, so callers that merge per-chunk results in index order stay
// bit-reproducible.
void parallel_chunks(int n_items, int n_chunks, const std::function<void(int begin, int end)>& fn);

}  // namespace trajdiff
