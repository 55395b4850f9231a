#include "cobar/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "cobar/similarity.hpp"
#include "parallel.hpp"

namespace cobar {

double cosine_distance(std::span<const Entry> a, std::span<const Entry> b) {
    return std::clamp(1.0 - cosine_similarity(a, b), 0.0, 2.0);
}

DistanceMatrix pairwise_cosine_distances(const RatingDataset& dataset,
                                         std::span<const UserIndex> users,
                                         unsigned threads) {
    const std::size_t n = users.size();
    std::vector<double> norms(n);
    for (std::size_t r = 0; r < n; ++r) {
        norms[r] = squared_norm(dataset.user_ratings(users[r]));
        if (norms[r] == 0.0)
            throw std::invalid_argument("user '" + dataset.user_id(users[r]) +
                                        "' has a zero rating vector");
    }

    DistanceMatrix out(n);
    // Each worker scatters its row into a dense buffer and walks the other
    // sparse rows; products are summed in item order, as in sparse_dot().
    const std::size_t block = 64;
    const std::size_t blocks = (n + block - 1) / block;
    detail::parallel_for(blocks, threads, [&](std::size_t b) {
        std::vector<double> dense(dataset.num_items(), 0.0);
        for (std::size_t r = b * block; r < std::min(n, (b + 1) * block); ++r) {
            const auto row = dataset.user_ratings(users[r]);
            for (const auto& e : row) dense[e.index] = e.value;
            for (std::size_t c = r + 1; c < n; ++c) {
                double dot = 0.0;
                for (const auto& e : dataset.user_ratings(users[c])) dot += dense[e.index] * e.value;
                out.set(r, c, std::clamp(1.0 - dot / std::sqrt(norms[r] * norms[c]), 0.0, 2.0));
            }
            for (const auto& e : row) dense[e.index] = 0.0;
        }
    });
    return out;
}

Dendrogram::Dendrogram(std::size_t leaf_count, std::vector<Merge> merges)
    : leaf_count_(leaf_count), merges_(std::move(merges)) {
    if (leaf_count_ == 0) throw std::invalid_argument("dendrogram needs at least one leaf");
    if (merges_.size() != leaf_count_ - 1)
        throw std::invalid_argument("dendrogram over " + std::to_string(leaf_count_) +
                                    " leaves needs " + std::to_string(leaf_count_ - 1) + " merges");
    const std::size_t nodes = 2 * leaf_count_ - 1;
    parent_.assign(nodes, kNoNode);
    member_count_.assign(nodes, 1);
    for (std::size_t k = 0; k < merges_.size(); ++k) {
        const auto& m = merges_[k];
        const auto id = static_cast<NodeId>(leaf_count_ + k);
        if (m.node != id) throw std::invalid_argument("merge node ids must follow creation order");
        for (const NodeId child : {m.left, m.right}) {
            if (child >= id) throw std::invalid_argument("merge child created after its parent");
            if (parent_[child] != kNoNode) throw std::invalid_argument("node merged twice");
            parent_[child] = id;
        }
        if (m.left == m.right) throw std::invalid_argument("node merged with itself");
        member_count_[id] = member_count_[m.left] + member_count_[m.right];
    }
}

std::vector<NodeId> Dendrogram::members(NodeId node) const {
    std::vector<NodeId> out;
    std::vector<NodeId> stack{node};
    while (!stack.empty()) {
        const NodeId top = stack.back();
        stack.pop_back();
        if (is_leaf(top)) {
            out.push_back(top);
        } else {
            const auto& m = merge_of(top);
            stack.push_back(m.right);
            stack.push_back(m.left);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

AncestorChain ancestor_chain(const Dendrogram& tree, NodeId leaf) {
    if (leaf >= tree.leaf_count())
        throw std::out_of_range("leaf " + std::to_string(leaf) + " is not in the dendrogram");
    AncestorChain chain;
    for (NodeId node = leaf; node != kNoNode; node = tree.parent(node)) chain.push_back(node);
    return chain;
}

namespace {

struct Candidate {
    double d2;
    NodeId lo;
    NodeId hi;
};

bool better(const Candidate& a, const Candidate& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.lo != b.lo) return a.lo < b.lo;
    return a.hi < b.hi;
}

}  // namespace

Dendrogram ward_linkage(const DistanceMatrix& distances) {
    const std::size_t n = distances.size();
    if (n == 0) throw std::invalid_argument("cannot cluster an empty set");

    // Slot-indexed working state; a slot is reused by the cluster formed when
    // it merges, the partner slot is retired.
    std::vector<double> d2(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d2[i * n + j] = distances(i, j) * distances(i, j);
    std::vector<NodeId> node(n);
    std::vector<double> size(n, 1.0);
    std::vector<char> active(n, 1);
    for (std::size_t i = 0; i < n; ++i) node[i] = static_cast<NodeId>(i);

    // Nearest active neighbor per slot; ties go to the smallest node id,
    // which makes the row minimum agree with the global pair order.
    std::vector<std::size_t> nn(n, 0);
    std::vector<double> nn_d2(n, std::numeric_limits<double>::infinity());
    auto refresh = [&](std::size_t s) {
        nn_d2[s] = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            if (t == s || !active[t]) continue;
            const double v = d2[s * n + t];
            if (v < nn_d2[s] || (v == nn_d2[s] && node[t] < node[nn[s]])) {
                nn_d2[s] = v;
                nn[s] = t;
            }
        }
    };
    for (std::size_t s = 0; s < n; ++s) refresh(s);

    std::vector<Merge> merges;
    merges.reserve(n - 1);
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t best = n;
        Candidate best_c{};
        for (std::size_t s = 0; s < n; ++s) {
            if (!active[s]) continue;
            const Candidate c{nn_d2[s], std::min(node[s], node[nn[s]]), std::max(node[s], node[nn[s]])};
            if (best == n || better(c, best_c)) {
                best = s;
                best_c = c;
            }
        }
        const std::size_t a = best;
        const std::size_t b = nn[a];
        const double dab = d2[a * n + b];
        const auto new_id = static_cast<NodeId>(n + step);
        merges.push_back({best_c.lo, best_c.hi, std::sqrt(std::max(0.0, dab)), new_id});

        const double na = size[a];
        const double nb = size[b];
        active[b] = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == a) continue;
            const double nk = size[k];
            const double v = ((na + nk) * d2[a * n + k] + (nb + nk) * d2[b * n + k] - nk * dab) /
                             (na + nb + nk);
            d2[a * n + k] = v;
            d2[k * n + a] = v;
        }
        node[a] = new_id;
        size[a] = na + nb;

        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == a) continue;
            if (nn[k] == a || nn[k] == b) {
                refresh(k);
            } else if (d2[k * n + a] < nn_d2[k]) {
                nn_d2[k] = d2[k * n + a];
                nn[k] = a;
            }
        }
        refresh(a);
    }
    return Dendrogram(n, std::move(merges));
}

UserHierarchy agglomerate(const RatingDataset& dataset, unsigned threads) {
    std::vector<UserIndex> users;
    for (UserIndex u = 0; u < dataset.num_users(); ++u)
        if (!dataset.user_ratings(u).empty()) users.push_back(u);
    if (users.empty()) throw std::invalid_argument("no user has a rating to cluster on");

    auto tree = ward_linkage(pairwise_cosine_distances(dataset, users, threads));
    std::vector<NodeId> leaf_of_user(dataset.num_users(), kNoNode);
    for (std::size_t leaf = 0; leaf < users.size(); ++leaf)
        leaf_of_user[users[leaf]] = static_cast<NodeId>(leaf);
    return {std::move(tree), std::move(leaf_of_user), std::move(users)};
}

void write_dendrogram(std::ostream& out, const Dendrogram& tree) {
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& m : tree.merges())
        out << m.left << ' ' << m.right << ' ' << m.height << ' ' << m.node << '\n';
    out.precision(old_precision);
}

}  // namespace cobar
