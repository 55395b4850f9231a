#include "cobar/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cobar/random.hpp"
#include "cobar/similarity.hpp"

namespace cobar {

namespace {

struct Neighbor {
    double sim;
    std::uint32_t index;
    double deviation;
};

// Keeps the k most similar neighbors (ties: smaller index) and returns the
// normalized weighted deviation, or nullopt for an empty neighborhood.
std::optional<double> aggregate(std::vector<Neighbor>& neighbors, std::size_t k) {
    if (neighbors.empty()) return std::nullopt;
    const auto by_sim = [](const Neighbor& a, const Neighbor& b) {
        return a.sim != b.sim ? a.sim > b.sim : a.index < b.index;
    };
    if (neighbors.size() > k) {
        std::nth_element(neighbors.begin(), neighbors.begin() + static_cast<std::ptrdiff_t>(k),
                         neighbors.end(), by_sim);
        neighbors.resize(k);
    }
    std::sort(neighbors.begin(), neighbors.end(), by_sim);
    double num = 0.0;
    double den = 0.0;
    for (const auto& n : neighbors) {
        num += n.sim * n.deviation;
        den += std::abs(n.sim);
    }
    return num / den;
}

}  // namespace

void MostPopular::fit(const RatingDataset& train) {
    stats_ = compute_rating_stats(train);
    lo_ = train.rating_min();
    hi_ = train.rating_max();
}

double MostPopular::predict(UserIndex /*user*/, ItemIndex item) const {
    return std::clamp(stats_.item_bias(item).value_or(stats_.global_mean), lo_, hi_);
}

void KnnConfig::validate() const {
    if (k < 1) throw std::invalid_argument("kNN needs k >= 1");
}

void UserKnn::fit(const RatingDataset& train) {
    train_ = train;
    stats_ = compute_rating_stats(train_);
    norms_.resize(train_.num_users());
    for (UserIndex u = 0; u < train_.num_users(); ++u) norms_[u] = squared_norm(train_.user_ratings(u));
}

double UserKnn::predict(UserIndex user, ItemIndex item) const {
    const auto bu = stats_.user_bias(user);
    if (!bu) return train_.clamp(stats_.global_mean);
    const auto mine = train_.user_ratings(user);
    std::vector<Neighbor> neighbors;
    for (const auto& rater : train_.item_ratings(item)) {
        if (rater.index == user) continue;
        const auto terms = sparse_dot(mine, train_.user_ratings(rater.index));
        if (terms.overlap < config_.min_overlap) continue;
        const double sim = terms.dot / std::sqrt(norms_[user] * norms_[rater.index]);
        if (sim <= 0.0) continue;
        neighbors.push_back({sim, rater.index, rater.value - stats_.user_mean[rater.index]});
    }
    return train_.clamp(*bu + aggregate(neighbors, config_.k).value_or(0.0));
}

void ItemKnn::fit(const RatingDataset& train) {
    train_ = train;
    stats_ = compute_rating_stats(train_);
    norms_.resize(train_.num_items());
    for (ItemIndex i = 0; i < train_.num_items(); ++i) norms_[i] = squared_norm(train_.item_ratings(i));
}

double ItemKnn::predict(UserIndex user, ItemIndex item) const {
    const auto bi = stats_.item_bias(item);
    if (!bi) return train_.clamp(stats_.global_mean);
    const auto target = train_.item_ratings(item);
    std::vector<Neighbor> neighbors;
    for (const auto& rated : train_.user_ratings(user)) {
        if (rated.index == item) continue;
        const auto terms = sparse_dot(target, train_.item_ratings(rated.index));
        if (terms.overlap < config_.min_overlap) continue;
        const double sim = terms.dot / std::sqrt(norms_[item] * norms_[rated.index]);
        if (sim <= 0.0) continue;
        neighbors.push_back({sim, rated.index, rated.value - stats_.item_mean[rated.index]});
    }
    return train_.clamp(*bi + aggregate(neighbors, config_.k).value_or(0.0));
}

void MfConfig::validate() const {
    if (factors < 1) throw std::invalid_argument("MF needs at least one factor");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("MF learning rate must be positive");
    if (!(regularization >= 0.0)) throw std::invalid_argument("MF regularization must be >= 0");
    if (!(init_scale >= 0.0)) throw std::invalid_argument("MF init scale must be >= 0");
}

namespace {

double raw_mf(const MfModel& m, UserIndex u, ItemIndex i) {
    const double* p = &m.user_factors[u * m.factors];
    const double* q = &m.item_factors[i * m.factors];
    double dot = 0.0;
    for (std::size_t f = 0; f < m.factors; ++f) dot += p[f] * q[f];
    return m.global_mean + m.user_bias[u] + m.item_bias[i] + dot;
}

double training_rmse(const MfModel& m, const RatingDataset& train) {
    double sse = 0.0;
    for (const auto& r : train.ratings()) {
        const double e = r.value - raw_mf(m, r.user, r.item);
        sse += e * e;
    }
    return std::sqrt(sse / static_cast<double>(train.size()));
}

}  // namespace

MfModel train_mf(const RatingDataset& train, const MfConfig& config) {
    config.validate();
    const auto stats = compute_rating_stats(train);
    MfModel m;
    m.factors = config.factors;
    m.global_mean = stats.global_mean;
    m.user_bias.assign(train.num_users(), 0.0);
    m.item_bias.assign(train.num_items(), 0.0);
    m.rating_min = train.rating_min();
    m.rating_max = train.rating_max();
    m.known_user.resize(train.num_users());
    m.known_item.resize(train.num_items());
    for (UserIndex u = 0; u < train.num_users(); ++u) m.known_user[u] = stats.user_count[u] > 0;
    for (ItemIndex i = 0; i < train.num_items(); ++i) m.known_item[i] = stats.item_count[i] > 0;

    Rng rng(config.seed);
    m.user_factors.resize(train.num_users() * m.factors);
    m.item_factors.resize(train.num_items() * m.factors);
    for (auto& v : m.user_factors) v = config.init_scale * standard_normal(rng);
    for (auto& v : m.item_factors) v = config.init_scale * standard_normal(rng);

    const double lr = config.learning_rate;
    const double reg = config.regularization;
    std::vector<std::uint32_t> order(train.size());
    std::iota(order.begin(), order.end(), 0u);
    const auto ratings = train.ratings();
    m.loss_history.push_back(training_rmse(m, train));
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle(std::span(order), rng);
        for (const auto idx : order) {
            const auto& r = ratings[idx];
            const double e = r.value - raw_mf(m, r.user, r.item);
            double& bu = m.user_bias[r.user];
            double& bi = m.item_bias[r.item];
            bu += lr * (e - reg * bu);
            bi += lr * (e - reg * bi);
            double* p = &m.user_factors[r.user * m.factors];
            double* q = &m.item_factors[r.item * m.factors];
            for (std::size_t f = 0; f < m.factors; ++f) {
                const double pf = p[f];
                const double qf = q[f];
                p[f] += lr * (e * qf - reg * pf);
                q[f] += lr * (e * pf - reg * qf);
            }
        }
        m.loss_history.push_back(training_rmse(m, train));
    }
    return m;
}

double predict_mf(const MfModel& m, UserIndex user, ItemIndex item) {
    const bool ku = user < m.known_user.size() && m.known_user[user];
    const bool ki = item < m.known_item.size() && m.known_item[item];
    double value = m.global_mean;
    if (ku && ki) {
        value = raw_mf(m, user, item);
    } else if (ku) {
        value += m.user_bias[user];
    } else if (ki) {
        value += m.item_bias[item];
    }
    return std::clamp(value, m.rating_min, m.rating_max);
}

double CobarPredictor::predict(UserIndex user, ItemIndex item) const {
    return model().predict(user, item).value;
}

Prediction CobarPredictor::explain(UserIndex user, ItemIndex item) const {
    return model().predict(user, item);
}

const CobarModel& CobarPredictor::model() const {
    if (!model_) throw std::logic_error("CoBaR predictor used before fit()");
    return *model_;
}

const std::vector<std::string>& algorithm_names() {
    static const std::vector<std::string> names{"cobar", "mp", "uknn", "iknn", "mf"};
    return names;
}

std::unique_ptr<RatingPredictor> make_predictor(std::string_view name, const AlgorithmConfigs& configs) {
    if (name == "cobar") return std::make_unique<CobarPredictor>(configs.cobar);
    if (name == "mp") return std::make_unique<MostPopular>();
    if (name == "uknn") return std::make_unique<UserKnn>(configs.knn);
    if (name == "iknn") return std::make_unique<ItemKnn>(configs.knn);
    if (name == "mf") return std::make_unique<MatrixFactorization>(configs.mf);
    throw std::invalid_argument("unknown algorithm '" + std::string(name) +
                                "' (expected cobar, mp, uknn, iknn or mf)");
}

}  // namespace cobar
