#include "cobar/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "parallel.hpp"

namespace cobar {

double rmse(std::span<const PredictedPair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("RMSE of an empty prediction list");
    double sse = 0.0;
    for (const auto& p : pairs) {
        const double e = p.predicted - p.actual;
        sse += e * e;
    }
    return std::sqrt(sse / static_cast<double>(pairs.size()));
}

namespace {

// Number of sign assignments giving each value of 2*W+, indexed by that
// value. Doubled average ranks are integers.
std::vector<double> signed_rank_counts(std::span<const long long> doubled_ranks) {
    const long long total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0LL);
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    long long reach = 0;
    for (const long long r : doubled_ranks) {
        for (long long s = reach; s >= 0; --s) {
            if (counts[static_cast<std::size_t>(s)] != 0.0)
                counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
        }
        reach += r;
    }
    return counts;
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, double level) {
    if (a.size() != b.size()) throw std::invalid_argument("Wilcoxon test needs paired samples of equal size");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0, 1)");

    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) throw std::invalid_argument("test undefined on identical samples");

    const std::size_t m = diffs.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return std::abs(diffs[x]) < std::abs(diffs[y]); });

    std::vector<long long> doubled(m);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < m;) {
        std::size_t j = i;
        while (j + 1 < m && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
        // positions i..j (0-based) share rank ((i+1) + (j+1)) / 2
        const auto twice_rank = static_cast<long long>(i + j + 2);
        for (std::size_t t = i; t <= j; ++t) doubled[order[t]] = twice_rank;
        const double ties = static_cast<double>(j - i + 1);
        tie_term += ties * ties * ties - ties;
        i = j + 1;
    }

    WilcoxonResult r;
    r.n = m;
    long long w_plus2 = 0;
    long long total2 = 0;
    for (std::size_t i = 0; i < m; ++i) {
        total2 += doubled[i];
        if (diffs[i] > 0) w_plus2 += doubled[i];
    }
    r.w_plus = static_cast<double>(w_plus2) / 2.0;
    r.w_minus = static_cast<double>(total2 - w_plus2) / 2.0;
    r.statistic = std::min(r.w_plus, r.w_minus);

    if (m <= kWilcoxonExactLimit) {
        const auto counts = signed_rank_counts(doubled);
        const double all = std::ldexp(1.0, static_cast<int>(m));
        double lower = 0.0;
        double upper = 0.0;
        for (std::size_t s = 0; s < counts.size(); ++s) {
            if (static_cast<long long>(s) <= w_plus2) lower += counts[s];
            if (static_cast<long long>(s) >= w_plus2) upper += counts[s];
        }
        r.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        r.exact = true;
    } else {
        const double n = static_cast<double>(m);
        const double mean = n * (n + 1.0) / 4.0;
        const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
        const double z = std::max(0.0, std::abs(r.w_plus - mean) - 0.5) / std::sqrt(var);
        r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
        r.exact = false;
    }
    r.significant = r.p_value < 1.0 - level;
    return r;
}

std::vector<AlgorithmEntry> registered_algorithms(std::span<const std::string> names,
                                                  const AlgorithmConfigs& configs) {
    std::vector<AlgorithmEntry> out;
    for (const auto& name : names) {
        make_predictor(name, configs);  // rejects unknown names up front
        out.push_back({name, [name, configs] { return make_predictor(name, configs); }});
    }
    return out;
}

const AlgorithmResult* EvalReport::find(const std::string& name) const {
    for (const auto& a : algorithms)
        if (a.name == name) return &a;
    return nullptr;
}

const AlgorithmResult* EvalReport::best() const {
    const AlgorithmResult* out = nullptr;
    for (const auto& a : algorithms)
        if (!out || a.mean_rmse < out->mean_rmse) out = &a;
    return out;
}

EvalReport run_cross_validation(const RatingDataset& dataset, std::span<const AlgorithmEntry> algorithms,
                                const EvalOptions& options) {
    if (algorithms.empty()) throw std::invalid_argument("no algorithms to evaluate");
    const FoldSplit split = kfold_split(dataset, options.folds, options.seed);

    const std::size_t k = split.k();
    std::vector<std::vector<double>> fold_rmse(algorithms.size(), std::vector<double>(k, 0.0));
    detail::parallel_for(k, options.threads, [&](std::size_t fold) {
        const auto train_idx = split.train_indices(fold);
        const auto test_idx = split.test_indices(fold);
        const RatingDataset train = dataset.subset(train_idx);
        const auto all = dataset.ratings();
        std::vector<PredictedPair> pairs(test_idx.size());
        for (std::size_t a = 0; a < algorithms.size(); ++a) {
            auto predictor = algorithms[a].make();
            predictor->fit(train);
            for (std::size_t t = 0; t < test_idx.size(); ++t) {
                const auto& r = all[test_idx[t]];
                pairs[t] = {predictor->predict(r.user, r.item), r.value};
            }
            fold_rmse[a][fold] = rmse(pairs);
        }
    });

    EvalReport report;
    report.dataset = options.dataset_name;
    report.users = dataset.num_users();
    report.items = dataset.num_items();
    report.ratings = dataset.size();
    report.folds = k;
    report.seed = options.seed;
    report.significance_level = options.significance_level;
    report.config = options.config;
    for (std::size_t f = 0; f < k; ++f) report.fold_sizes.push_back(split.fold_size(f));
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        AlgorithmResult res{algorithms[a].name, fold_rmse[a], 0.0};
        res.mean_rmse = std::accumulate(res.fold_rmse.begin(), res.fold_rmse.end(), 0.0) /
                        static_cast<double>(k);
        report.algorithms.push_back(std::move(res));
    }
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        for (std::size_t b = a + 1; b < algorithms.size(); ++b) {
            PairwiseComparison cmp{algorithms[a].name, algorithms[b].name, std::nullopt, {}};
            try {
                cmp.test = wilcoxon_signed_rank(fold_rmse[a], fold_rmse[b], options.significance_level);
            } catch (const std::invalid_argument& e) {
                cmp.error = e.what();
            }
            report.comparisons.push_back(std::move(cmp));
        }
    }
    return report;
}

std::string report_to_json(const EvalReport& report) {
    using nlohmann::ordered_json;
    ordered_json doc;
    doc["dataset"] = report.dataset;
    doc["users"] = report.users;
    doc["items"] = report.items;
    doc["ratings"] = report.ratings;
    doc["folds"] = report.folds;
    doc["seed"] = report.seed;
    doc["significance_level"] = report.significance_level;
    doc["wilcoxon_pairing"] = report.pairing;
    doc["fold_sizes"] = report.fold_sizes;
    doc["config"] = ordered_json::object();
    for (const auto& [key, value] : report.config) doc["config"][key] = value;
    doc["algorithms"] = ordered_json::array();
    for (const auto& a : report.algorithms) {
        doc["algorithms"].push_back({{"name", a.name}, {"fold_rmse", a.fold_rmse}, {"mean_rmse", a.mean_rmse}});
    }
    doc["comparisons"] = ordered_json::array();
    for (const auto& c : report.comparisons) {
        ordered_json entry{{"first", c.first}, {"second", c.second}};
        if (c.test) {
            entry["n"] = c.test->n;
            entry["w_plus"] = c.test->w_plus;
            entry["w_minus"] = c.test->w_minus;
            entry["statistic"] = c.test->statistic;
            entry["p_value"] = c.test->p_value;
            entry["exact"] = c.test->exact;
            entry["significant"] = c.test->significant;
        } else {
            entry["error"] = c.error;
        }
        doc["comparisons"].push_back(std::move(entry));
    }
    if (const auto* b = report.best()) doc["best"] = b->name;
    return doc.dump(2) + "\n";
}

void print_report(std::ostream& out, const EvalReport& report, int precision) {
    const int width = std::max(10, precision + 6);
    const auto* best = report.best();
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision);
    os << "dataset: " << (report.dataset.empty() ? "-" : report.dataset) << "  users=" << report.users
       << " items=" << report.items << " ratings=" << report.ratings << " folds=" << report.folds
       << " seed=" << report.seed << "\n\n";
    os << std::left << std::setw(8) << "fold" << std::right;
    for (const auto& a : report.algorithms) os << std::setw(width) << a.name << ' ';
    os << '\n';
    for (std::size_t f = 0; f < report.folds; ++f) {
        os << std::left << std::setw(8) << f << std::right;
        for (const auto& a : report.algorithms) os << std::setw(width) << a.fold_rmse[f] << ' ';
        os << '\n';
    }
    os << std::left << std::setw(8) << "mean" << std::right;
    for (const auto& a : report.algorithms)
        os << std::setw(width) << a.mean_rmse << (&a == best ? '*' : ' ');
    os << "\n\n";
    if (!report.comparisons.empty()) {
        os << "Wilcoxon signed-rank over fold RMSEs (two-sided, level " << std::setprecision(2)
           << report.significance_level << ")\n"
           << std::setprecision(precision);
        for (const auto& c : report.comparisons) {
            os << "  " << c.first << " vs " << c.second << ": ";
            if (c.test) {
                os << "W=" << std::setprecision(1) << c.test->statistic << std::setprecision(precision)
                   << " p=" << c.test->p_value << (c.test->exact ? "" : " (normal approx)")
                   << (c.test->significant ? " significant" : "");
            } else {
                os << "undefined (" << c.error << ")";
            }
            os << '\n';
        }
    }
    out << os.str();
}

}  // namespace cobar
