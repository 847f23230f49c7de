#include "trajdiff/parallel.hpp"

#include <future>
#include <stdexcept>
#include <vector>

namespace trajdiff {

void parallel_chunks(int n_items, int n_chunks, const std::function<void(int begin, int end)>& fn) {
    if (n_items <= 0) return;
    if (n_chunks < 1) throw std::invalid_argument("parallel_chunks: n_chunks must be >= 1");
    if (n_chunks > n_items) n_chunks = n_items;
    if (n_chunks == 1) {
        fn(0, n_items);
        return;
    }
    std::vector<std::future<void>> futures;
    futures.reserve(static_cast<std::size_t>(n_chunks));
    for (int c = 0; c < n_chunks; ++c) {
        int begin = static_cast<int>(static_cast<long long>(n_items) * c / n_chunks);
        int end = static_cast<int>(static_cast<long long>(n_items) * (c + 1) / n_chunks);
        futures.push_back(std::async(std::launch::async, fn, begin, end));
    }
    for (auto& f : futures) f.get();
}

}  // namespace trajdiff
