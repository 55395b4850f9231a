#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cobar/cobar.hpp"
#include "cobar/data.hpp"

namespace cobar {

/// Rating predictor trained on one dataset (typically a training fold).
/// Predictions take indices from the training set's index space.
class RatingPredictor {
public:
    virtual ~RatingPredictor() = default;
    virtual std::string name() const = 0;
    virtual void fit(const RatingDataset& train) = 0;
    virtual double predict(UserIndex user, ItemIndex item) const = 0;
};

/// Item mean, global mean for unseen items.
class MostPopular final : public RatingPredictor {
public:
    std::string name() const override { return "mp"; }
    void fit(const RatingDataset& train) override;
    double predict(UserIndex user, ItemIndex item) const override;

private:
    RatingStats stats_;
    double lo_ = 0.0;
    double hi_ = 0.0;
};

struct KnnConfig {
    std::size_t k = 30;
    std::size_t min_overlap = 1;

    void validate() const;
};

/// Mean-centered user-based kNN with cosine similarity:
///   r = b_u + sum sim(u,v) (r_vi - b_v) / sum |sim(u,v)|
/// over the k most similar users who rated i (positive similarity only).
class UserKnn final : public RatingPredictor {
public:
    explicit UserKnn(KnnConfig config = {}) : config_(config) { config_.validate(); }
    std::string name() const override { return "uknn"; }
    void fit(const RatingDataset& train) override;
    double predict(UserIndex user, ItemIndex item) const override;

private:
    KnnConfig config_;
    RatingDataset train_;
    RatingStats stats_;
    std::vector<double> norms_;
};

/// Item-based mirror of UserKnn: neighbors are items the user rated,
/// deviations are from item means. Empty neighborhood -> item mean, then
/// global mean.
class ItemKnn final : public RatingPredictor {
public:
    explicit ItemKnn(KnnConfig config = {}) : config_(config) { config_.validate(); }
    std::string name() const override { return "iknn"; }
    void fit(const RatingDataset& train) override;
    double predict(UserIndex user, ItemIndex item) const override;

private:
    KnnConfig config_;
    RatingDataset train_;
    RatingStats stats_;
    std::vector<double> norms_;
};

struct MfConfig {
    std::size_t factors = 10;
    double learning_rate = 0.01;
    double regularization = 0.015;
    std::size_t epochs = 30;
    double init_scale = 0.1;
    std::uint64_t seed = 42;

    void validate() const;
};

struct MfModel {
    std::size_t factors = 0;
    double global_mean = 0.0;
    std::vector<double> user_bias;
    std::vector<double> item_bias;
    std::vector<double> user_factors;  // row-major users x factors
    std::vector<double> item_factors;  // row-major items x factors
    std::vector<char> known_user;
    std::vector<char> known_item;
    double rating_min = 0.0;
    double rating_max = 0.0;
    /// Training RMSE before the first epoch and after each epoch.
    std::vector<double> loss_history;
};

/// Biased MF, r = mu + b_u + b_i + p_u . q_i, fit by SGD over a freshly
/// shuffled rating order each epoch.
MfModel train_mf(const RatingDataset& train, const MfConfig& config);

/// Clamped prediction; terms of a user or item unseen in training are dropped.
double predict_mf(const MfModel& model, UserIndex user, ItemIndex item);

class MatrixFactorization final : public RatingPredictor {
public:
    explicit MatrixFactorization(MfConfig config = {}) : config_(config) { config_.validate(); }
    std::string name() const override { return "mf"; }
    void fit(const RatingDataset& train) override { model_ = train_mf(train, config_); }
    double predict(UserIndex user, ItemIndex item) const override {
        return predict_mf(model_, user, item);
    }
    const MfModel& model() const { return model_; }

private:
    MfConfig config_;
    MfModel model_;
};

class CobarPredictor final : public RatingPredictor {
public:
    explicit CobarPredictor(CobarConfig config = {}) : config_(config) { config_.validate(); }
    std::string name() const override { return "cobar"; }
    void fit(const RatingDataset& train) override { model_.emplace(train, config_); }
    double predict(UserIndex user, ItemIndex item) const override;
    Prediction explain(UserIndex user, ItemIndex item) const;
    const CobarModel& model() const;

private:
    CobarConfig config_;
    std::optional<CobarModel> model_;
};

struct AlgorithmConfigs {
    CobarConfig cobar;
    KnnConfig knn;
    MfConfig mf;
};

/// Registered names: cobar, mp, uknn, iknn, mf.
const std::vector<std::string>& algorithm_names();

/// Throws std::invalid_argument for an unregistered name.
std::unique_ptr<RatingPredictor> make_predictor(std::string_view name,
                                                const AlgorithmConfigs& configs = {});

}  // namespace cobar
