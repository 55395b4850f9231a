#include "cobar/cobar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/students_t.hpp>

namespace cobar {

void CobarConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    if (!(confidence_level > 0.0 && confidence_level < 1.0))
        throw std::invalid_argument("confidence level must lie in (0, 1)");
}

double t_critical(double level, std::size_t dof) {
    if (dof == 0) throw std::invalid_argument("t critical value needs dof >= 1");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0, 1)");
    const boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
}

double confidence_half_width(std::size_t n, double s2, double level) {
    if (n < 2) throw std::invalid_argument("confidence interval needs at least two ratings");
    if (s2 < 0.0) throw std::invalid_argument("negative variance");
    if (s2 == 0.0) return 0.0;
    return t_critical(level, n - 1) * std::sqrt(s2 / static_cast<double>(n));
}

TCriticalTable::TCriticalTable(double level, std::size_t max_dof) : level_(level) {
    values_.resize(std::max<std::size_t>(max_dof, 1) + 1, 0.0);
    for (std::size_t dof = 1; dof < values_.size(); ++dof) values_[dof] = t_critical(level, dof);
}

double TCriticalTable::operator()(std::size_t dof) const {
    if (dof == 0) throw std::invalid_argument("t critical value needs dof >= 1");
    if (dof < values_.size()) return values_[dof];
    return t_critical(level_, dof);
}

double ItemAccumulator::variance() const {
    const double n = count;
    return std::max(0.0, (n * sum_sq - sum * sum) / (n * (n - 1.0)));
}

ClusterStatsIndex::ClusterStatsIndex(const UserHierarchy& hierarchy, const RatingDataset& train) {
    const auto& tree = hierarchy.tree;
    offsets_.reserve(tree.node_count() + 1);
    offsets_.push_back(0);
    for (NodeId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
        for (const auto& e : train.user_ratings(hierarchy.user_of_leaf.at(leaf)))
            entries_.push_back({e.index, 1, e.value, e.value * e.value});
        offsets_.push_back(entries_.size());
    }
    for (const auto& m : tree.merges()) {
        // entries_ may reallocate while appending, so walk by position.
        std::size_t i = offsets_[m.left];
        std::size_t j = offsets_[m.right];
        const std::size_t i_end = offsets_[m.left + 1];
        const std::size_t j_end = offsets_[m.right + 1];
        while (i < i_end || j < j_end) {
            if (j == j_end || (i < i_end && entries_[i].item < entries_[j].item)) {
                entries_.push_back(entries_[i++]);
            } else if (i == i_end || entries_[j].item < entries_[i].item) {
                entries_.push_back(entries_[j++]);
            } else {
                ItemAccumulator acc = entries_[i];
                acc.count += entries_[j].count;
                acc.sum += entries_[j].sum;
                acc.sum_sq += entries_[j].sum_sq;
                entries_.push_back(acc);
                ++i;
                ++j;
            }
        }
        offsets_.push_back(entries_.size());
    }
    for (const auto& acc : node_stats(tree.root())) max_count_ = std::max(max_count_, acc.count);
}

std::span<const ItemAccumulator> ClusterStatsIndex::node_stats(NodeId node) const {
    if (node + 1 >= offsets_.size()) throw std::out_of_range("unknown dendrogram node");
    return std::span<const ItemAccumulator>(entries_).subspan(offsets_[node],
                                                              offsets_[node + 1] - offsets_[node]);
}

const ItemAccumulator* ClusterStatsIndex::find(NodeId node, ItemIndex item) const {
    const auto row = node_stats(node);
    const auto it = std::lower_bound(row.begin(), row.end(), item,
                                     [](const ItemAccumulator& a, ItemIndex i) { return a.item < i; });
    if (it == row.end() || it->item != item) return nullptr;
    return &*it;
}

std::optional<ClusterChoice> select_optimal_cluster(const AncestorChain& chain, ItemIndex item,
                                                    const ClusterStatsIndex& stats,
                                                    const TCriticalTable& t_table,
                                                    TieBreak tie_break) {
    std::optional<ClusterChoice> best;
    for (const NodeId node : chain) {
        const auto* acc = stats.find(node, item);
        if (acc == nullptr || acc->count < 2) continue;
        const double s2 = acc->variance();
        const double hw = s2 == 0.0 ? 0.0 : t_table(acc->count - 1) * std::sqrt(s2 / acc->count);
        const bool wins = !best || hw < best->half_width ||
                          (tie_break == TieBreak::largest_cluster && hw == best->half_width);
        if (wins) best = ClusterChoice{node, acc->count, acc->mean(), hw};
    }
    return best;
}

std::string_view to_string(Fallback fallback) {
    switch (fallback) {
        case Fallback::none: return "none";
        case Fallback::single_rating: return "single_rating";
        case Fallback::cold_item: return "cold_item";
        case Fallback::cold_user: return "cold_user";
    }
    return "unknown";
}

CobarModel::CobarModel(const RatingDataset& train, CobarConfig config)
    : config_((config.validate(), config)),
      rating_min_(train.rating_min()),
      rating_max_(train.rating_max()),
      stats_(compute_rating_stats(train)),
      hierarchy_(agglomerate(train, config_.threads)),
      cluster_stats_(hierarchy_, train),
      t_table_(config_.confidence_level, cluster_stats_.max_count()) {}

AncestorChain CobarModel::chain_of(UserIndex user) const {
    const NodeId leaf = hierarchy_.leaf(user);
    if (leaf == kNoNode) return {};
    return ancestor_chain(hierarchy_.tree, leaf);
}

Prediction CobarModel::predict(UserIndex user, ItemIndex item) const {
    if (user >= stats_.user_count.size()) throw std::out_of_range("unknown user index");
    if (item >= stats_.item_count.size()) throw std::out_of_range("unknown item index");

    Prediction p{user, item, stats_.global_mean, std::nullopt, Fallback::cold_user,
                 stats_.global_mean, std::nullopt};
    if (const auto bu = stats_.user_bias(user)) {
        p.user_mean = *bu;
        p.cluster = select_optimal_cluster(chain_of(user), item, cluster_stats_, t_table_,
                                           config_.tie_break);
        if (p.cluster) {
            p.value = config_.gamma * *bu + (1.0 - config_.gamma) * p.cluster->mean;
            p.chosen_node = p.cluster->node;
            p.fallback = Fallback::none;
        } else {
            p.value = *bu;
            p.fallback = stats_.item_count[item] == 0 ? Fallback::cold_item : Fallback::single_rating;
        }
    }
    if (config_.clamp) p.value = std::clamp(p.value, rating_min_, rating_max_);
    return p;
}

}  // namespace cobar
