#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "oracles.hpp"

using namespace cobar;

namespace {

struct Outcome {
    int status;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int status = cli::run(args, out, err);
    return {status, out.str(), err.str()};
}

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("cobar_cli_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string field(const std::string& text, const std::string& key) {
    const auto at = text.find(key + ": ");
    if (at == std::string::npos) return {};
    const auto start = at + key.size() + 2;
    return text.substr(start, text.find('\n', start) - start);
}

const std::vector<std::string> kFigure1{"--data", testing::fixture_path("figure1.tsv"), "--skip-header"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
}

}  // namespace

TEST_CASE("evaluate writes a deterministic JSON report") {
    const auto a = temp_file("a.json");
    const auto b = temp_file("b.json");
    const std::vector<std::string> base{"evaluate", "--data", testing::fixture_path("two_clusters.tsv"),
                                        "--algos", "cobar,mp"};
    const auto ra = run(with(base, {"--out", a}));
    REQUIRE(ra.status == 0);
    const auto rb = run(with(base, {"--out", b, "--threads", "2"}));
    REQUIRE(rb.status == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(ra.out.find("mean") != std::string::npos);

    const auto doc = nlohmann::json::parse(slurp(a));
    REQUIRE(doc["algorithms"].size() == 2);
    CHECK(doc["algorithms"][0]["fold_rmse"].size() == 10);
    CHECK(doc["algorithms"][1]["fold_rmse"].size() == 10);
    REQUIRE(doc["comparisons"].size() == 1);
    CHECK(doc["comparisons"][0]["p_value"].is_number());
    CHECK(doc["dataset"] == "two_clusters");
    CHECK(doc["config"]["cobar.gamma"] == "0.5");
    std::filesystem::remove(a);
    std::filesystem::remove(b);
}

TEST_CASE("missing data file") {
    const auto r = run({"evaluate", "--data", "/nonexistent/ratings.tsv"});
    CHECK(r.status != 0);
    CHECK(r.err.find("/nonexistent/ratings.tsv") != std::string::npos);
}

TEST_CASE("usage errors") {
    CHECK(run({}).status != 0);
    CHECK(run({"frobnicate"}).status != 0);
    CHECK(run(with({"evaluate"}, with(kFigure1, {"--algos", "cobar,svd"}))).status == 2);
    CHECK(run(with({"evaluate"}, with(kFigure1, {"--gamma", "2"}))).status != 0);
    const auto r = run(with({"predict"}, with(kFigure1, {"--user", "ghost", "--item", "i"})));
    CHECK(r.status != 0);
    CHECK(r.err.find("ghost") != std::string::npos);
}

TEST_CASE("predict explains the figure 1 example") {
    const auto r = run(with({"predict"}, with(kFigure1, {"--user", "active", "--item", "i"})));
    REQUIRE(r.status == 0);
    CHECK(field(r.out, "prediction") == "3.1000");
    CHECK(field(r.out, "b_u") == "3.4000");
    CHECK(field(r.out, "b_i^c") == "2.8000");
    CHECK(field(r.out, "fallback") == "none");
    CHECK(field(r.out, "cluster_members") == "16");
    CHECK(field(r.out, "cluster_ratings") == "15");
    CHECK(std::stod(field(r.out, "half_width")) == doctest::Approx(0.4997).epsilon(1e-3));

    const auto g0 = run(with({"predict"}, with(kFigure1, {"--user", "active", "--item", "i", "--gamma", "0"})));
    REQUIRE(g0.status == 0);
    CHECK(field(g0.out, "prediction") == field(g0.out, "b_i^c"));

    const auto path = temp_file("single.tsv");
    {
        std::ofstream f(path);
        f << "a\tx\t4\nb\tx\t2\nb\ty\t5\nc\tz\t3\n";
    }
    // y has a single rating anywhere in a's chain
    const auto single = run({"predict", "--data", path, "--user", "a", "--item", "y"});
    REQUIRE(single.status == 0);
    CHECK(field(single.out, "fallback") == "single_rating");
    CHECK(field(single.out, "prediction") == "4.0000");
    std::filesystem::remove(path);
}

TEST_CASE("cluster exports the dendrogram") {
    const auto path = temp_file("tree.txt");
    const auto r = run(with({"cluster"}, with(kFigure1, {"--out", path})));
    REQUIRE(r.status == 0);
    std::ifstream in(path);
    std::size_t lines = 0;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::size_t left = 0, right = 0, node = 0;
        double height = 0;
        CHECK(static_cast<bool>(ls >> left >> right >> height >> node));
        CHECK(node == 22 + lines);
        ++lines;
    }
    CHECK(lines == 21);
    std::filesystem::remove(path);
}

TEST_CASE("large datasets need an explicit user cap") {
    const auto path = temp_file("many.tsv");
    {
        std::ofstream f(path);
        for (int u = 0; u < 5001; ++u) f << "u" << u << "\tm" << u % 7 << '\t' << 1 + u % 5 << '\n';
    }
    const auto r = run({"evaluate", "--data", path, "--algos", "cobar"});
    CHECK(r.status != 0);
    CHECK(r.err.find("--max-users") != std::string::npos);
    const auto capped = run({"evaluate", "--data", path, "--algos", "cobar,mp", "--max-users", "300", "--folds", "3"});
    CHECK(capped.status == 0);
    std::filesystem::remove(path);
}
