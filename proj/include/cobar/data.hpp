#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cobar/types.hpp"

namespace cobar {

/// Sparse user x item rating store.
///
/// Users and items carry contiguous internal indices and keep their external
/// ids. Ratings are stored once as triples and indexed twice (CSR by user,
/// CSR by item); both adjacency lists are sorted by the opposite index.
/// A dataset produced by subset() keeps the index space and scale bounds of
/// its parent, so a training fold can be queried with test-fold indices.
class RatingDataset {
public:
    RatingDataset() = default;

    /// Builds a dataset from already indexed triples. Throws
    /// std::invalid_argument on duplicate (user, item) pairs, out of range
    /// indices, or ratings outside [rating_min, rating_max]. When bounds are
    /// omitted they are taken from the observed ratings.
    static RatingDataset from_triples(std::vector<std::string> user_ids,
                                      std::vector<std::string> item_ids,
                                      std::vector<Rating> ratings,
                                      std::optional<double> rating_min = std::nullopt,
                                      std::optional<double> rating_max = std::nullopt);

    std::size_t num_users() const { return user_ids_.size(); }
    std::size_t num_items() const { return item_ids_.size(); }
    std::size_t size() const { return ratings_.size(); }
    bool empty() const { return ratings_.empty(); }

    std::span<const Rating> ratings() const { return ratings_; }
    std::span<const Entry> user_ratings(UserIndex user) const;
    std::span<const Entry> item_ratings(ItemIndex item) const;

    double rating_min() const { return rating_min_; }
    double rating_max() const { return rating_max_; }
    double clamp(double value) const;

    const std::string& user_id(UserIndex user) const { return user_ids_.at(user); }
    const std::string& item_id(ItemIndex item) const { return item_ids_.at(item); }
    std::optional<UserIndex> find_user(std::string_view external_id) const;
    std::optional<ItemIndex> find_item(std::string_view external_id) const;

    /// Dataset holding only the selected triples, same users/items/bounds.
    RatingDataset subset(std::span<const std::size_t> triple_indices) const;

    friend bool operator==(const RatingDataset& a, const RatingDataset& b);

private:
    void build_index();

    std::vector<std::string> user_ids_;
    std::vector<std::string> item_ids_;
    std::unordered_map<std::string, UserIndex> user_lookup_;
    std::unordered_map<std::string, ItemIndex> item_lookup_;
    std::vector<Rating> ratings_;
    std::vector<std::size_t> user_offsets_;
    std::vector<Entry> user_entries_;
    std::vector<std::size_t> item_offsets_;
    std::vector<Entry> item_entries_;
    double rating_min_ = 0.0;
    double rating_max_ = 0.0;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& detail, const std::string& source = {})
        : std::runtime_error((source.empty() ? "" : source + ": ") +
                             (line == 0 ? "" : "line " + std::to_string(line) + ": ") + detail),
          line_(line),
          detail_(detail) {}

    /// 1-based line number, 0 when the error is not tied to one line.
    std::size_t line() const { return line_; }
    const std::string& detail() const { return detail_; }

private:
    std::size_t line_;
    std::string detail_;
};

struct ParseOptions {
    /// Field separator. ' ' splits on any run of spaces/tabs.
    char delimiter = '\t';
    bool skip_header = false;
    std::optional<double> rating_min;
    std::optional<double> rating_max;
};

struct ParseResult {
    RatingDataset dataset;
    std::size_t duplicates = 0;
};

/// Reads `user<delim>item<delim>rating[<delim>ignored...]` lines. Blank lines
/// are skipped; a repeated (user, item) pair keeps the last rating and bumps
/// the duplicate counter.
ParseResult parse_ratings(std::istream& in, const ParseOptions& options = {});
ParseResult load_ratings(const std::string& path, const ParseOptions& options = {});

/// Writes one `user<delim>item<delim>rating` line per triple, in triple order.
void write_ratings(std::ostream& out, const RatingDataset& dataset, char delimiter = '\t');

/// Per-user and per-item means over one (training) dataset.
struct RatingStats {
    std::vector<double> user_mean;
    std::vector<std::uint32_t> user_count;
    std::vector<double> item_mean;
    std::vector<std::uint32_t> item_count;
    double global_mean = 0.0;

    std::optional<double> user_bias(UserIndex user) const {
        if (user_count[user] == 0) return std::nullopt;
        return user_mean[user];
    }
    std::optional<double> item_bias(ItemIndex item) const {
        if (item_count[item] == 0) return std::nullopt;
        return item_mean[item];
    }
};

/// Throws std::invalid_argument on an empty dataset.
RatingStats compute_rating_stats(const RatingDataset& train);

/// Seeded partition of triple indices into k folds whose sizes differ by at
/// most one.
class FoldSplit {
public:
    FoldSplit(std::size_t k, std::uint64_t seed, std::vector<std::uint32_t> assignment);

    std::size_t k() const { return k_; }
    std::uint64_t seed() const { return seed_; }
    std::span<const std::uint32_t> assignment() const { return assignment_; }

    std::size_t fold_size(std::size_t fold) const;
    std::vector<std::size_t> test_indices(std::size_t fold) const;
    std::vector<std::size_t> train_indices(std::size_t fold) const;

private:
    std::size_t k_;
    std::uint64_t seed_;
    std::vector<std::uint32_t> assignment_;
};

/// Throws std::invalid_argument when k < 2 or k exceeds the triple count.
FoldSplit kfold_split(const RatingDataset& dataset, std::size_t k, std::uint64_t seed);

/// Keeps the ratings of `max_users` users drawn uniformly with `seed`.
/// Surviving users and items are re-indexed in order of first appearance;
/// scale bounds are inherited. Returns a copy when there are few enough users.
RatingDataset subsample_users(const RatingDataset& dataset, std::size_t max_users,
                              std::uint64_t seed);

}  // namespace cobar
