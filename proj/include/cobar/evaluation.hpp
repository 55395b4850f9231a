#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cobar/baselines.hpp"
#include "cobar/data.hpp"

namespace cobar {

struct PredictedPair {
    double predicted;
    double actual;
};

/// Root mean square error. Throws std::invalid_argument on an empty list.
double rmse(std::span<const PredictedPair> pairs);

struct WilcoxonResult {
    std::size_t n = 0;  // nonzero differences
    double w_plus = 0.0;
    double w_minus = 0.0;
    double statistic = 0.0;  // min(w_plus, w_minus)
    double p_value = 1.0;    // two-sided
    bool significant = false;
    bool exact = true;
};

/// Largest number of nonzero differences for which the p-value is computed
/// from the exact null distribution; beyond it a tie-corrected normal
/// approximation with continuity correction is used.
inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Paired two-sided Wilcoxon signed-rank test on a - b. Zero differences are
/// dropped, tied |differences| share their average rank. Significant iff
/// p < 1 - level. Throws std::invalid_argument on size mismatch or when every
/// difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    double level = 0.99);

struct AlgorithmEntry {
    std::string name;
    std::function<std::unique_ptr<RatingPredictor>()> make;
};

/// Registered algorithms by name.
std::vector<AlgorithmEntry> registered_algorithms(std::span<const std::string> names,
                                                  const AlgorithmConfigs& configs);

struct EvalOptions {
    std::size_t folds = 10;
    std::uint64_t seed = 42;
    double significance_level = 0.99;
    unsigned threads = 1;
    std::string dataset_name;
    std::map<std::string, std::string> config;  // recorded verbatim in the report
};

struct AlgorithmResult {
    std::string name;
    std::vector<double> fold_rmse;
    double mean_rmse = 0.0;
};

struct PairwiseComparison {
    std::string first;
    std::string second;
    std::optional<WilcoxonResult> test;
    std::string error;  // set when the test is undefined
};

struct EvalReport {
    std::string dataset;
    std::size_t users = 0;
    std::size_t items = 0;
    std::size_t ratings = 0;
    std::size_t folds = 0;
    std::uint64_t seed = 0;
    double significance_level = 0.99;
    std::string pairing = "fold_rmse";
    std::vector<std::size_t> fold_sizes;
    std::map<std::string, std::string> config;
    std::vector<AlgorithmResult> algorithms;
    std::vector<PairwiseComparison> comparisons;

    const AlgorithmResult* find(const std::string& name) const;
    /// Lowest mean RMSE; first listed wins ties.
    const AlgorithmResult* best() const;
};

/// k-fold cross-validation: every algorithm is trained on the same train
/// portion and scored on the same test fold, then every pair is compared by
/// a Wilcoxon test over the per-fold RMSEs.
EvalReport run_cross_validation(const RatingDataset& dataset, std::span<const AlgorithmEntry> algorithms,
                                const EvalOptions& options);

/// Deterministic JSON document (schema in README).
std::string report_to_json(const EvalReport& report);

/// Fold-by-algorithm RMSE table with the best mean marked '*', then the
/// pairwise tests. Values use `precision` decimals.
void print_report(std::ostream& out, const EvalReport& report, int precision = 4);

}  // namespace cobar
