#include "cobar/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cobar/random.hpp"

namespace cobar {

namespace {

template <typename Key>
void build_csr(std::size_t rows, std::span<const Rating> ratings, Key key,
               std::vector<std::size_t>& offsets, std::vector<Entry>& entries) {
    offsets.assign(rows + 1, 0);
    for (const auto& r : ratings) ++offsets[key(r).first + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    entries.resize(ratings.size());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& r : ratings) {
        const auto [row, entry] = key(r);
        entries[cursor[row]++] = entry;
    }
    for (std::size_t row = 0; row < rows; ++row) {
        std::sort(entries.begin() + static_cast<std::ptrdiff_t>(offsets[row]),
                  entries.begin() + static_cast<std::ptrdiff_t>(offsets[row + 1]),
                  [](const Entry& a, const Entry& b) { return a.index < b.index; });
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
    std::vector<std::string_view> fields;
    if (delimiter == ' ') {
        std::size_t pos = 0;
        while (pos < line.size()) {
            while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
            if (pos == line.size()) break;
            const std::size_t end = line.find_first_of(" \t", pos);
            const std::size_t stop = end == std::string_view::npos ? line.size() : end;
            fields.push_back(line.substr(pos, stop - pos));
            pos = stop;
        }
        return fields;
    }
    std::size_t pos = 0;
    while (true) {
        const std::size_t end = line.find(delimiter, pos);
        if (end == std::string_view::npos) {
            fields.push_back(trim(line.substr(pos)));
            break;
        }
        fields.push_back(trim(line.substr(pos, end - pos)));
        pos = end + 1;
    }
    return fields;
}

std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

}  // namespace

RatingDataset RatingDataset::from_triples(std::vector<std::string> user_ids,
                                          std::vector<std::string> item_ids,
                                          std::vector<Rating> ratings,
                                          std::optional<double> rating_min,
                                          std::optional<double> rating_max) {
    RatingDataset d;
    d.user_ids_ = std::move(user_ids);
    d.item_ids_ = std::move(item_ids);
    d.ratings_ = std::move(ratings);

    for (UserIndex u = 0; u < d.user_ids_.size(); ++u) {
        if (!d.user_lookup_.emplace(d.user_ids_[u], u).second)
            throw std::invalid_argument("duplicate user id '" + d.user_ids_[u] + "'");
    }
    for (ItemIndex i = 0; i < d.item_ids_.size(); ++i) {
        if (!d.item_lookup_.emplace(d.item_ids_[i], i).second)
            throw std::invalid_argument("duplicate item id '" + d.item_ids_[i] + "'");
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& r : d.ratings_) {
        if (r.user >= d.user_ids_.size() || r.item >= d.item_ids_.size())
            throw std::invalid_argument("rating references an unknown user or item index");
        lo = std::min(lo, r.value);
        hi = std::max(hi, r.value);
    }
    d.rating_min_ = rating_min.value_or(d.ratings_.empty() ? 0.0 : lo);
    d.rating_max_ = rating_max.value_or(d.ratings_.empty() ? 0.0 : hi);
    if (d.rating_min_ > d.rating_max_) throw std::invalid_argument("rating_min exceeds rating_max");
    if (!d.ratings_.empty() && (lo < d.rating_min_ || hi > d.rating_max_))
        throw std::invalid_argument("rating outside the configured scale");

    d.build_index();
    return d;
}

void RatingDataset::build_index() {
    build_csr(user_ids_.size(), ratings_,
              [](const Rating& r) { return std::pair{r.user, Entry{r.item, r.value}}; },
              user_offsets_, user_entries_);
    build_csr(item_ids_.size(), ratings_,
              [](const Rating& r) { return std::pair{r.item, Entry{r.user, r.value}}; },
              item_offsets_, item_entries_);
    for (std::size_t u = 0; u < user_ids_.size(); ++u) {
        for (std::size_t e = user_offsets_[u] + 1; e < user_offsets_[u + 1]; ++e) {
            if (user_entries_[e].index == user_entries_[e - 1].index)
                throw std::invalid_argument("duplicate rating for user '" + user_ids_[u] +
                                            "' and item '" + item_ids_[user_entries_[e].index] + "'");
        }
    }
}

std::span<const Entry> RatingDataset::user_ratings(UserIndex user) const {
    return std::span<const Entry>(user_entries_).subspan(
        user_offsets_.at(user), user_offsets_.at(user + 1) - user_offsets_[user]);
}

std::span<const Entry> RatingDataset::item_ratings(ItemIndex item) const {
    return std::span<const Entry>(item_entries_).subspan(
        item_offsets_.at(item), item_offsets_.at(item + 1) - item_offsets_[item]);
}

double RatingDataset::clamp(double value) const {
    return std::clamp(value, rating_min_, rating_max_);
}

std::optional<UserIndex> RatingDataset::find_user(std::string_view external_id) const {
    const auto it = user_lookup_.find(std::string(external_id));
    if (it == user_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<ItemIndex> RatingDataset::find_item(std::string_view external_id) const {
    const auto it = item_lookup_.find(std::string(external_id));
    if (it == item_lookup_.end()) return std::nullopt;
    return it->second;
}

RatingDataset RatingDataset::subset(std::span<const std::size_t> triple_indices) const {
    std::vector<Rating> selected;
    selected.reserve(triple_indices.size());
    for (const auto idx : triple_indices) selected.push_back(ratings_.at(idx));
    return from_triples(user_ids_, item_ids_, std::move(selected), rating_min_, rating_max_);
}

bool operator==(const RatingDataset& a, const RatingDataset& b) {
    return a.user_ids_ == b.user_ids_ && a.item_ids_ == b.item_ids_ && a.ratings_ == b.ratings_ &&
           a.rating_min_ == b.rating_min_ && a.rating_max_ == b.rating_max_;
}

ParseResult parse_ratings(std::istream& in, const ParseOptions& options) {
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::unordered_map<std::string, UserIndex> users;
    std::unordered_map<std::string, ItemIndex> items;
    std::vector<Rating> ratings;
    std::unordered_map<std::uint64_t, std::size_t> position;
    std::size_t duplicates = 0;

    std::string line;
    std::size_t line_no = 0;
    bool header_pending = options.skip_header;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        const auto fields = split_fields(view, options.delimiter);
        if (fields.size() < 3)
            throw ParseError(line_no, "expected at least 3 fields, found " + std::to_string(fields.size()));
        if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty user or item id");
        const auto value = parse_double(fields[2]);
        if (!value) throw ParseError(line_no, "non-numeric rating '" + std::string(fields[2]) + "'");
        if ((options.rating_min && *value < *options.rating_min) ||
            (options.rating_max && *value > *options.rating_max))
            throw ParseError(line_no, "rating " + std::string(fields[2]) + " outside the configured scale");

        const auto [uit, new_user] =
            users.try_emplace(std::string(fields[0]), static_cast<UserIndex>(user_ids.size()));
        if (new_user) user_ids.emplace_back(fields[0]);
        const auto [iit, new_item] =
            items.try_emplace(std::string(fields[1]), static_cast<ItemIndex>(item_ids.size()));
        if (new_item) item_ids.emplace_back(fields[1]);

        const std::uint64_t key = (std::uint64_t{uit->second} << 32) | iit->second;
        const auto [pit, fresh] = position.try_emplace(key, ratings.size());
        if (fresh) {
            ratings.push_back({uit->second, iit->second, *value});
        } else {
            ratings[pit->second].value = *value;
            ++duplicates;
        }
    }
    if (in.bad()) throw ParseError(0, "read error");
    if (ratings.empty()) throw ParseError(0, "no ratings in input");

    return {RatingDataset::from_triples(std::move(user_ids), std::move(item_ids), std::move(ratings),
                                        options.rating_min, options.rating_max),
            duplicates};
}

ParseResult load_ratings(const std::string& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ratings file '" + path + "'");
    try {
        return parse_ratings(in, options);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.detail(), path);
    }
}

void write_ratings(std::ostream& out, const RatingDataset& dataset, char delimiter) {
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : dataset.ratings()) {
        out << dataset.user_id(r.user) << delimiter << dataset.item_id(r.item) << delimiter << r.value
            << '\n';
    }
    out.precision(old_precision);
}

RatingStats compute_rating_stats(const RatingDataset& train) {
    if (train.empty()) throw std::invalid_argument("cannot compute statistics of an empty dataset");
    RatingStats stats;
    stats.user_mean.assign(train.num_users(), 0.0);
    stats.user_count.assign(train.num_users(), 0);
    stats.item_mean.assign(train.num_items(), 0.0);
    stats.item_count.assign(train.num_items(), 0);
    double total = 0.0;
    for (UserIndex u = 0; u < train.num_users(); ++u) {
        double sum = 0.0;
        for (const auto& e : train.user_ratings(u)) sum += e.value;
        const auto n = train.user_ratings(u).size();
        stats.user_count[u] = static_cast<std::uint32_t>(n);
        if (n > 0) stats.user_mean[u] = sum / static_cast<double>(n);
        total += sum;
    }
    for (ItemIndex i = 0; i < train.num_items(); ++i) {
        double sum = 0.0;
        for (const auto& e : train.item_ratings(i)) sum += e.value;
        const auto n = train.item_ratings(i).size();
        stats.item_count[i] = static_cast<std::uint32_t>(n);
        if (n > 0) stats.item_mean[i] = sum / static_cast<double>(n);
    }
    stats.global_mean = total / static_cast<double>(train.size());
    return stats;
}

FoldSplit::FoldSplit(std::size_t k, std::uint64_t seed, std::vector<std::uint32_t> assignment)
    : k_(k), seed_(seed), assignment_(std::move(assignment)) {
    for (const auto f : assignment_) {
        if (f >= k_) throw std::invalid_argument("fold id out of range");
    }
}

std::size_t FoldSplit::fold_size(std::size_t fold) const {
    return static_cast<std::size_t>(std::count(assignment_.begin(), assignment_.end(), fold));
}

std::vector<std::size_t> FoldSplit::test_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment_.size(); ++i)
        if (assignment_[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldSplit::train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment_.size(); ++i)
        if (assignment_[i] != fold) out.push_back(i);
    return out;
}

FoldSplit kfold_split(const RatingDataset& dataset, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("k-fold split needs k >= 2");
    if (k > dataset.size())
        throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the number of ratings (" +
                                    std::to_string(dataset.size()) + ")");
    std::vector<std::uint32_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(seed);
    shuffle(std::span(order), rng);
    std::vector<std::uint32_t> assignment(dataset.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        assignment[order[pos]] = static_cast<std::uint32_t>(pos % k);
    return FoldSplit(k, seed, std::move(assignment));
}

RatingDataset subsample_users(const RatingDataset& dataset, std::size_t max_users,
                              std::uint64_t seed) {
    if (max_users == 0) throw std::invalid_argument("max_users must be positive");
    if (dataset.num_users() <= max_users) return dataset;

    std::vector<UserIndex> users(dataset.num_users());
    std::iota(users.begin(), users.end(), 0u);
    Rng rng(seed);
    shuffle(std::span(users), rng);
    std::vector<char> keep(dataset.num_users(), 0);
    for (std::size_t i = 0; i < max_users; ++i) keep[users[i]] = 1;

    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::vector<UserIndex> user_map(dataset.num_users(), std::numeric_limits<UserIndex>::max());
    std::vector<ItemIndex> item_map(dataset.num_items(), std::numeric_limits<ItemIndex>::max());
    std::vector<Rating> ratings;
    for (const auto& r : dataset.ratings()) {
        if (!keep[r.user]) continue;
        if (user_map[r.user] == std::numeric_limits<UserIndex>::max()) {
            user_map[r.user] = static_cast<UserIndex>(user_ids.size());
            user_ids.push_back(dataset.user_id(r.user));
        }
        if (item_map[r.item] == std::numeric_limits<ItemIndex>::max()) {
            item_map[r.item] = static_cast<ItemIndex>(item_ids.size());
            item_ids.push_back(dataset.item_id(r.item));
        }
        ratings.push_back({user_map[r.user], item_map[r.item], r.value});
    }
    return RatingDataset::from_triples(std::move(user_ids), std::move(item_ids), std::move(ratings),
                                       dataset.rating_min(), dataset.rating_max());
}

}  // namespace cobar
