#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "cobar/data.hpp"
#include "cobar/types.hpp"

namespace cobar {

/// 1 - cosine similarity, clipped to [0, 2]. Throws std::invalid_argument when
/// either vector is all zeros.
double cosine_distance(std::span<const Entry> a, std::span<const Entry> b);

/// Dense symmetric distance matrix with a zero diagonal.
class DistanceMatrix {
public:
    explicit DistanceMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
    void set(std::size_t i, std::size_t j, double d) {
        values_[i * n_ + j] = d;
        values_[j * n_ + i] = d;
    }

private:
    std::size_t n_;
    std::vector<double> values_;
};

/// Cosine distances between the rating vectors of `users` (row order = span
/// order). Rows are split across `threads` workers.
DistanceMatrix pairwise_cosine_distances(const RatingDataset& dataset,
                                         std::span<const UserIndex> users,
                                         unsigned threads = 1);

struct Merge {
    NodeId left;
    NodeId right;
    double height;
    NodeId node;

    friend bool operator==(const Merge&, const Merge&) = default;
};

/// Binary merge tree. Leaves are 0..n-1; merge k creates node n+k.
class Dendrogram {
public:
    /// Validates the merge list: n-1 entries, node ids in creation order, and
    /// every child created earlier and used once. Throws std::invalid_argument.
    Dendrogram(std::size_t leaf_count, std::vector<Merge> merges);

    std::size_t leaf_count() const { return leaf_count_; }
    std::size_t node_count() const { return parent_.size(); }
    NodeId root() const { return static_cast<NodeId>(parent_.size() - 1); }
    bool is_leaf(NodeId node) const { return node < leaf_count_; }

    std::span<const Merge> merges() const { return merges_; }
    const Merge& merge_of(NodeId internal) const { return merges_.at(internal - leaf_count_); }

    /// kNoNode for the root.
    NodeId parent(NodeId node) const { return parent_.at(node); }
    std::uint32_t member_count(NodeId node) const { return member_count_.at(node); }
    std::vector<NodeId> members(NodeId node) const;

    friend bool operator==(const Dendrogram& a, const Dendrogram& b) {
        return a.leaf_count_ == b.leaf_count_ && a.merges_ == b.merges_;
    }

private:
    std::size_t leaf_count_;
    std::vector<Merge> merges_;
    std::vector<NodeId> parent_;
    std::vector<std::uint32_t> member_count_;
};

/// Node ids from a leaf up to the root, leaf first.
using AncestorChain = std::vector<NodeId>;

/// Throws std::out_of_range when `leaf` is not a leaf of `tree`.
AncestorChain ancestor_chain(const Dendrogram& tree, NodeId leaf);

/// Ward agglomeration on an arbitrary dissimilarity matrix. Linkages live in
/// squared-distance space and follow the Lance-Williams update
///   d2(k, i+j) = ((n_i+n_k) d2(k,i) + (n_j+n_k) d2(k,j) - n_k d2(i,j)) / (n_i+n_j+n_k),
/// merge heights are sqrt(d2). Ties on the minimal linkage go to the
/// lexicographically smallest (node id, node id) pair; in each merge `left`
/// is the smaller id.
Dendrogram ward_linkage(const DistanceMatrix& distances);

/// Dendrogram over the users that have at least one rating.
struct UserHierarchy {
    Dendrogram tree;
    std::vector<NodeId> leaf_of_user;     // kNoNode for users left out
    std::vector<UserIndex> user_of_leaf;  // leaf id -> user index

    NodeId leaf(UserIndex user) const {
        return user < leaf_of_user.size() ? leaf_of_user[user] : kNoNode;
    }
};

/// Ward linkage over cosine distances between users' raw rating vectors.
/// Users without ratings are excluded. Throws std::invalid_argument when no
/// user has a rating.
UserHierarchy agglomerate(const RatingDataset& dataset, unsigned threads = 1);

/// One `left right height new_id` line per merge.
void write_dendrogram(std::ostream& out, const Dendrogram& tree);

}  // namespace cobar
