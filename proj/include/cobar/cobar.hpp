#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cobar/clustering.hpp"
#include "cobar/data.hpp"
#include "cobar/types.hpp"

namespace cobar {

enum class TieBreak {
    smallest_cluster,  // earliest in the ancestor chain
    largest_cluster,
};

struct CobarConfig {
    double gamma = 0.5;
    double confidence_level = 0.95;
    bool clamp = true;
    TieBreak tie_break = TieBreak::smallest_cluster;
    unsigned threads = 1;

    /// Throws std::invalid_argument unless 0 <= gamma <= 1 and 0 < level < 1.
    void validate() const;
};

/// Two-sided Student-t critical value t(level, dof).
double t_critical(double level, std::size_t dof);

/// t(level, n-1) * sqrt(s2 / n). Throws std::invalid_argument for n < 2 or
/// s2 < 0.
double confidence_half_width(std::size_t n, double s2, double level);

/// Critical values for one confidence level, precomputed for dof 1..max_dof.
class TCriticalTable {
public:
    TCriticalTable(double level, std::size_t max_dof);

    double level() const { return level_; }
    double operator()(std::size_t dof) const;

private:
    double level_;
    std::vector<double> values_;
};

/// Rating accumulator for one (cluster node, item) pair.
struct ItemAccumulator {
    ItemIndex item = 0;
    std::uint32_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    double mean() const { return sum / count; }

    /// Sample variance (n-1 denominator), written as
    /// (n * sum_sq - sum^2) / (n (n-1)) so that identical rating multisets
    /// give bit-identical results. Requires count >= 2.
    double variance() const;

    friend bool operator==(const ItemAccumulator&, const ItemAccumulator&) = default;
};

/// Per-node, per-item (count, sum, sum_sq) for every dendrogram node, built
/// bottom-up: a parent's list is the sorted merge of its children's lists.
class ClusterStatsIndex {
public:
    ClusterStatsIndex(const UserHierarchy& hierarchy, const RatingDataset& train);

    std::size_t node_count() const { return offsets_.size() - 1; }
    std::size_t entry_count() const { return entries_.size(); }

    /// All items rated inside `node`, sorted by item.
    std::span<const ItemAccumulator> node_stats(NodeId node) const;
    /// nullptr when no member of `node` rated `item`.
    const ItemAccumulator* find(NodeId node, ItemIndex item) const;

    std::uint32_t max_count() const { return max_count_; }

private:
    std::vector<std::size_t> offsets_;
    std::vector<ItemAccumulator> entries_;
    std::uint32_t max_count_ = 0;
};

struct ClusterChoice {
    NodeId node;
    std::uint32_t count;  // ratings of the item inside the node
    double mean;          // b_i^c
    double half_width;
};

/// Among the chain nodes holding at least two ratings of `item`, returns the
/// one with the smallest confidence half-width (tie per config.tie_break).
/// std::nullopt when no chain node has two ratings.
std::optional<ClusterChoice> select_optimal_cluster(const AncestorChain& chain, ItemIndex item,
                                                    const ClusterStatsIndex& stats,
                                                    const TCriticalTable& t_table,
                                                    TieBreak tie_break = TieBreak::smallest_cluster);

enum class Fallback { none, single_rating, cold_item, cold_user };

std::string_view to_string(Fallback fallback);

struct Prediction {
    UserIndex user;
    ItemIndex item;
    double value;
    std::optional<NodeId> chosen_node;
    Fallback fallback;
    double user_mean;  // b_u, or the global mean for a cold user
    std::optional<ClusterChoice> cluster;
};

/// Trained CoBaR state for one training set. Immutable after construction;
/// predict() is safe to call concurrently.
class CobarModel {
public:
    CobarModel(const RatingDataset& train, CobarConfig config = {});

    Prediction predict(UserIndex user, ItemIndex item) const;

    const CobarConfig& config() const { return config_; }
    const RatingStats& rating_stats() const { return stats_; }
    const UserHierarchy& hierarchy() const { return hierarchy_; }
    const ClusterStatsIndex& cluster_stats() const { return cluster_stats_; }
    const TCriticalTable& t_table() const { return t_table_; }
    AncestorChain chain_of(UserIndex user) const;

private:
    CobarConfig config_;
    double rating_min_;
    double rating_max_;
    RatingStats stats_;
    UserHierarchy hierarchy_;
    ClusterStatsIndex cluster_stats_;
    TCriticalTable t_table_;
};

}  // namespace cobar
