#include "fednest/rng.hpp"

#include <algorithm>
#include <numeric>

namespace fednest {

std::vector<std::size_t> RngStream::sample_without_replacement(std::size_t m,
                                                               std::size_t k) {
    if (k > m) k = m;
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t pick = j + static_cast<std::size_t>(uniform_below(m - j));
        std::swap(idx[j], idx[pick]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace fednest
