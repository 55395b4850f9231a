#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cobar/baselines.hpp"
#include "cobar/clustering.hpp"
#include "cobar/cobar.hpp"
#include "cobar/data.hpp"
#include "cobar/evaluation.hpp"

namespace cobar::cli {

namespace {

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataFlags {
    std::string path;
    std::string delimiter = "tab";
    bool skip_header = false;
    std::optional<double> rating_min;
    std::optional<double> rating_max;
    std::optional<std::size_t> max_users;
    std::uint64_t subsample_seed = 1;
};

struct RunConfig {
    DataFlags data;
    std::string algos = "cobar,mp,uknn,iknn,mf";
    AlgorithmConfigs configs;
    bool no_clamp = false;
    std::size_t folds = 10;
    std::uint64_t seed = 42;
    double wilcoxon_level = 0.99;
    unsigned threads = 1;
    std::string out_path;
    std::string name;
    std::string user;
    std::string item;
};

void add_data_flags(CLI::App& cmd, DataFlags& flags) {
    cmd.add_option("--data", flags.path, "Ratings file: user, item, rating per line")->required();
    cmd.add_option("--delimiter", flags.delimiter,
                   "Field separator: tab, comma, space (any whitespace run) or a single character")
        ->capture_default_str();
    cmd.add_flag("--skip-header", flags.skip_header, "Ignore the first non-blank line");
    cmd.add_option("--rating-min", flags.rating_min, "Lower scale bound (default: observed minimum)");
    cmd.add_option("--rating-max", flags.rating_max, "Upper scale bound (default: observed maximum)");
    cmd.add_option("--max-users", flags.max_users, "Keep a seeded random sample of at most N users")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--subsample-seed", flags.subsample_seed, "Seed of the user sample")->capture_default_str();
}

void add_cobar_flags(CLI::App& cmd, RunConfig& cfg) {
    cmd.add_option("--gamma", cfg.configs.cobar.gamma, "Weight of the user mean in the blend")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd.add_option("--confidence", cfg.configs.cobar.confidence_level,
                   "Confidence level of the per-cluster intervals")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd.add_flag("--no-clamp", cfg.no_clamp, "Do not clip predictions to the rating scale");
    cmd.add_option("--threads", cfg.threads, "Worker threads, 0 = all cores")->capture_default_str();
}

char parse_delimiter(const std::string& name) {
    if (name == "tab" || name == "\\t") return '\t';
    if (name == "comma") return ',';
    if (name == "space" || name == "whitespace") return ' ';
    if (name == "semicolon") return ';';
    if (name.size() == 1) return name[0];
    throw UsageError("unknown delimiter '" + name + "' (use tab, comma, space or one character)");
}

RatingDataset load(const DataFlags& flags, std::ostream& err) {
    if (!std::filesystem::is_regular_file(flags.path))
        throw UsageError("data file not found: " + flags.path);
    ParseOptions opts;
    opts.delimiter = parse_delimiter(flags.delimiter);
    opts.skip_header = flags.skip_header;
    opts.rating_min = flags.rating_min;
    opts.rating_max = flags.rating_max;
    auto parsed = load_ratings(flags.path, opts);
    if (parsed.duplicates > 0)
        err << "warning: " << parsed.duplicates << " duplicate (user, item) ratings; kept the last one\n";
    if (flags.max_users)
        return subsample_users(parsed.dataset, *flags.max_users, flags.subsample_seed);
    return std::move(parsed.dataset);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part.erase(0, part.find_first_not_of(' '));
        part.erase(part.find_last_not_of(' ') + 1);
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

void check_user_ceiling(const RatingDataset& dataset, const DataFlags& flags) {
    if (flags.max_users || dataset.num_users() <= kDefaultUserCeiling) return;
    throw UsageError("dataset has " + std::to_string(dataset.num_users()) +
                     " users; CoBaR clustering needs O(n^2) memory and is capped at " +
                     std::to_string(kDefaultUserCeiling) +
                     " users. Pass --max-users N (e.g. --max-users 2000) and optionally --subsample-seed S");
}

template <typename T>
std::string str(const T& v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

int cmd_evaluate(RunConfig& cfg, std::ostream& out, std::ostream& err) {
    cfg.configs.cobar.clamp = !cfg.no_clamp;
    cfg.configs.cobar.threads = cfg.threads;
    const auto names = split_list(cfg.algos);
    if (names.empty()) throw UsageError("--algos lists no algorithm");
    for (const auto& n : names) {
        if (std::find(algorithm_names().begin(), algorithm_names().end(), n) == algorithm_names().end())
            throw UsageError("unknown algorithm '" + n + "' (expected cobar, mp, uknn, iknn or mf)");
    }
    const RatingDataset dataset = load(cfg.data, err);
    if (std::find(names.begin(), names.end(), "cobar") != names.end()) check_user_ceiling(dataset, cfg.data);
    if (cfg.folds < 2 || cfg.folds > dataset.size())
        throw UsageError("--folds must lie in [2, number of ratings]");

    EvalOptions opts;
    opts.folds = cfg.folds;
    opts.seed = cfg.seed;
    opts.significance_level = cfg.wilcoxon_level;
    opts.threads = cfg.threads;
    opts.dataset_name = cfg.name.empty() ? std::filesystem::path(cfg.data.path).stem().string() : cfg.name;
    opts.config = {
        {"algorithms", cfg.algos},
        {"cobar.gamma", str(cfg.configs.cobar.gamma)},
        {"cobar.confidence_level", str(cfg.configs.cobar.confidence_level)},
        {"cobar.interval", "student_t"},
        {"cobar.tie_break", "smallest_cluster"},
        {"clamp", cfg.no_clamp ? "false" : "true"},
        {"knn.k", str(cfg.configs.knn.k)},
        {"knn.min_overlap", str(cfg.configs.knn.min_overlap)},
        {"mf.factors", str(cfg.configs.mf.factors)},
        {"mf.learning_rate", str(cfg.configs.mf.learning_rate)},
        {"mf.regularization", str(cfg.configs.mf.regularization)},
        {"mf.epochs", str(cfg.configs.mf.epochs)},
        {"mf.init_scale", str(cfg.configs.mf.init_scale)},
        {"mf.seed", str(cfg.configs.mf.seed)},
        {"max_users", cfg.data.max_users ? str(*cfg.data.max_users) : "none"},
        {"subsample_seed", str(cfg.data.subsample_seed)},
    };
    const auto algorithms = registered_algorithms(names, cfg.configs);
    const EvalReport report = run_cross_validation(dataset, algorithms, opts);
    print_report(out, report);
    if (!cfg.out_path.empty()) {
        std::ofstream f(cfg.out_path, std::ios::binary);
        if (!f) throw UsageError("cannot write report to " + cfg.out_path);
        f << report_to_json(report);
        out << "\nreport written to " << cfg.out_path << '\n';
    }
    return 0;
}

int cmd_predict(RunConfig& cfg, std::ostream& out, std::ostream& err) {
    cfg.configs.cobar.clamp = !cfg.no_clamp;
    cfg.configs.cobar.threads = cfg.threads;
    const RatingDataset dataset = load(cfg.data, err);
    check_user_ceiling(dataset, cfg.data);
    const auto user = dataset.find_user(cfg.user);
    if (!user) throw UsageError("unknown user id '" + cfg.user + "'");
    const auto item = dataset.find_item(cfg.item);
    if (!item) throw UsageError("unknown item id '" + cfg.item + "'");

    const CobarModel model(dataset, cfg.configs.cobar);
    const Prediction p = model.predict(*user, *item);
    out << std::fixed << std::setprecision(4);
    out << "user: " << cfg.user << "\nitem: " << cfg.item << '\n';
    out << "prediction: " << p.value << '\n';
    out << "b_u: " << p.user_mean << '\n';
    out << "fallback: " << to_string(p.fallback) << '\n';
    if (p.cluster) {
        out << "b_i^c: " << p.cluster->mean << '\n';
        out << "cluster: " << p.cluster->node << '\n';
        out << "cluster_members: " << model.hierarchy().tree.member_count(p.cluster->node) << '\n';
        out << "cluster_ratings: " << p.cluster->count << '\n';
        out << "half_width: " << p.cluster->half_width << '\n';
    }
    return 0;
}

int cmd_cluster(RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const RatingDataset dataset = load(cfg.data, err);
    check_user_ceiling(dataset, cfg.data);
    const UserHierarchy h = agglomerate(dataset, cfg.threads);
    if (cfg.out_path.empty()) {
        write_dendrogram(out, h.tree);
    } else {
        std::ofstream f(cfg.out_path);
        if (!f) throw UsageError("cannot write dendrogram to " + cfg.out_path);
        write_dendrogram(f, h.tree);
        out << h.tree.merges().size() << " merges written to " << cfg.out_path << '\n';
    }
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"CoBaR: confidence-interval cluster recommender and evaluation harness", "cobar"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validated RMSE comparison");
    add_data_flags(*evaluate, cfg.data);
    add_cobar_flags(*evaluate, cfg);
    evaluate->add_option("--algos", cfg.algos, "Comma-separated subset of cobar,mp,uknn,iknn,mf")
        ->capture_default_str();
    evaluate->add_option("--folds", cfg.folds, "Number of folds")->capture_default_str();
    evaluate->add_option("--seed", cfg.seed, "Seed of the fold shuffle")->capture_default_str();
    evaluate->add_option("--wilcoxon-level", cfg.wilcoxon_level, "Confidence level of the Wilcoxon test")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    evaluate->add_option("--out", cfg.out_path, "Write the JSON report here");
    evaluate->add_option("--name", cfg.name, "Dataset name recorded in the report (default: file stem)");
    evaluate->add_option("--knn-k", cfg.configs.knn.k, "Neighbors for uknn/iknn")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    evaluate->add_option("--mf-factors", cfg.configs.mf.factors, "MF latent factors")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    evaluate->add_option("--mf-lr", cfg.configs.mf.learning_rate, "MF learning rate")->capture_default_str();
    evaluate->add_option("--mf-reg", cfg.configs.mf.regularization, "MF L2 regularization")
        ->capture_default_str();
    evaluate->add_option("--mf-epochs", cfg.configs.mf.epochs, "MF SGD epochs")->capture_default_str();
    evaluate->add_option("--mf-seed", cfg.configs.mf.seed, "MF initialization seed")->capture_default_str();

    auto* predict = app.add_subcommand("predict", "Explain one CoBaR prediction trained on the full file");
    add_data_flags(*predict, cfg.data);
    add_cobar_flags(*predict, cfg);
    predict->add_option("--user", cfg.user, "External user id")->required();
    predict->add_option("--item", cfg.item, "External item id")->required();

    auto* cluster = app.add_subcommand("cluster", "Export the user dendrogram (left right height new_id)");
    add_data_flags(*cluster, cfg.data);
    cluster->add_option("--out", cfg.out_path, "Output file (default: standard output)");
    cluster->add_option("--threads", cfg.threads, "Worker threads, 0 = all cores")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (evaluate->parsed()) return cmd_evaluate(cfg, out, err);
        if (predict->parsed()) return cmd_predict(cfg, out, err);
        if (cluster->parsed()) return cmd_cluster(cfg, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace cobar::cli
