#pragma once

#include <cstddef>

namespace phireg::detail {

/// Pairwise (cascade) sum of term(0) + ... + term(n-1). The bracketing depends
/// only on n, so the result is reproducible however the terms are produced.
template <class T, class Term>
T pairwise_sum(std::size_t first, std::size_t last, const Term& term) {
    const std::size_t count = last - first;
    if (count <= 8) {
        T acc = term(first);
        for (std::size_t i = first + 1; i < last; ++i) acc += term(i);
        return acc;
    }
    const std::size_t mid = first + count / 2;
    T left = pairwise_sum<T>(first, mid, term);
    left += pairwise_sum<T>(mid, last, term);
    return left;
}

}  // namespace phireg::detail
