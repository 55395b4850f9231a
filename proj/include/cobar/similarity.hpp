#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

#include "cobar/types.hpp"

namespace cobar {

struct SparseDot {
    double dot = 0.0;
    std::size_t overlap = 0;
};

/// Dot product of two sparse rows sorted by index, accumulated in index order.
inline SparseDot sparse_dot(std::span<const Entry> a, std::span<const Entry> b) {
    SparseDot out;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].index < b[j].index) {
            ++i;
        } else if (b[j].index < a[i].index) {
            ++j;
        } else {
            out.dot += a[i].value * b[j].value;
            ++out.overlap;
            ++i;
            ++j;
        }
    }
    return out;
}

inline double squared_norm(std::span<const Entry> a) {
    double s = 0.0;
    for (const auto& e : a) s += e.value * e.value;
    return s;
}

/// Cosine of the angle between two rating vectors (zeros at unrated indices).
/// Throws std::invalid_argument if either vector has zero norm.
inline double cosine_similarity(std::span<const Entry> a, std::span<const Entry> b) {
    const double na = squared_norm(a);
    const double nb = squared_norm(b);
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine of a zero-norm vector");
    return sparse_dot(a, b).dot / std::sqrt(na * nb);
}

}  // namespace cobar
