#pragma once

#include <cstdint>
#include <limits>

namespace cobar {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

// Dendrogram node id: leaves are 0..n-1, internal nodes n..2n-2 in merge order.
using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

struct Rating {
    UserIndex user;
    ItemIndex item;
    double value;

    friend bool operator==(const Rating&, const Rating&) = default;
};

// One cell of a sparse row: the column index (item for a user row, user for an
// item row) and the rating stored there.
struct Entry {
    std::uint32_t index;
    double value;

    friend bool operator==(const Entry&, const Entry&) = default;
};

}  // namespace cobar
