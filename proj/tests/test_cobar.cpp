#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cobar/cobar.hpp"
#include "oracles.hpp"

using namespace cobar;

namespace {

RatingDataset figure1() {
    ParseOptions opts;
    opts.skip_header = true;
    return load_ratings(testing::fixture_path("figure1.tsv"), opts).dataset;
}

}  // namespace

TEST_CASE("confidence half-width examples") {
    // s^2 of {1,2,3,4,5} is 2.5; 2.7764 * sqrt(0.5)
    CHECK(confidence_half_width(5, 2.5, 0.95) == doctest::Approx(1.9632).epsilon(1e-4));
    CHECK(confidence_half_width(3, 0.0, 0.95) == 0.0);
    CHECK_THROWS_AS(confidence_half_width(1, 1.0, 0.95), std::invalid_argument);
    CHECK_THROWS_AS(confidence_half_width(4, -0.1, 0.95), std::invalid_argument);
}

TEST_CASE("t critical values match the printed table") {
    const TCriticalTable table(0.95, 10);
    for (std::size_t n = 2; n <= 30; ++n) {
        CAPTURE(n);
        CHECK(std::abs(t_critical(0.95, n - 1) - testing::kStudentT95[n - 2]) <= 1e-4);
        CHECK(table(n - 1) == t_critical(0.95, n - 1));
    }
    CHECK(t_critical(0.99, 1) == doctest::Approx(63.6567).epsilon(1e-5));
    CHECK_THROWS_AS(table(0), std::invalid_argument);
}

TEST_CASE("cluster statistics aggregate their members exactly") {
    const auto d = figure1();
    const auto h = agglomerate(d);
    const ClusterStatsIndex stats(h, d);
    CHECK(stats.node_count() == h.tree.node_count());

    const auto item = *d.find_item("i");
    // a leaf holds only its own user's ratings
    const auto leaf = h.leaf(*d.find_user("u2_1"));
    const auto* own = stats.find(leaf, item);
    REQUIRE(own != nullptr);
    CHECK(own->count == 1);
    CHECK(own->sum == 1.0);
    CHECK(stats.find(h.leaf(*d.find_user("active")), item) == nullptr);
    // the root holds the item's complete column
    const auto* all = stats.find(h.tree.root(), item);
    REQUIRE(all != nullptr);
    CHECK(all->count == d.item_ratings(item).size());

    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto r = testing::random_dataset(seed);
        const auto hr = agglomerate(r);
        const ClusterStatsIndex sr(hr, r);
        for (NodeId node = 0; node < hr.tree.node_count(); ++node) {
            std::vector<UserIndex> users;
            for (const auto l : hr.tree.members(node)) users.push_back(hr.user_of_leaf[l]);
            std::size_t present = 0;
            for (ItemIndex i = 0; i < r.num_items(); ++i) {
                const auto expect = testing::stats_from_scratch(r, users, i);
                const auto* acc = sr.find(node, i);
                if (expect.count == 0) {
                    CHECK(acc == nullptr);
                    continue;
                }
                ++present;
                REQUIRE(acc != nullptr);
                CHECK(acc->count == expect.count);
                CHECK(acc->sum == expect.sum);
                CHECK(acc->sum_sq == expect.sum_sq);
                if (node >= hr.tree.leaf_count()) {
                    const auto& m = hr.tree.merge_of(node);
                    for (const auto child : {m.left, m.right}) {
                        const auto* c = sr.find(child, i);
                        if (c) CHECK(acc->count >= c->count);
                    }
                }
            }
            CHECK(sr.node_stats(node).size() == present);
        }
    }
}

TEST_CASE("sample variance is bit-identical for equal multisets") {
    const ItemAccumulator a{0, 3, 1.0 + 2.5 + 4.0, 1.0 + 6.25 + 16.0};
    const ItemAccumulator b{7, 3, 4.0 + 1.0 + 2.5, 16.0 + 1.0 + 6.25};
    CHECK(a.variance() == b.variance());
    CHECK(a.variance() == doctest::Approx(2.25).epsilon(1e-15));
}

TEST_CASE("figure 1 example picks the middle cluster") {
    const auto d = figure1();
    const CobarModel model(d);
    const auto user = *d.find_user("active");
    const auto item = *d.find_item("i");
    const auto chain = model.chain_of(user);
    REQUIRE(chain.size() >= 3);

    // chain nodes holding the item, from the leaf up
    std::vector<std::pair<std::size_t, std::uint32_t>> with_item;
    for (const auto node : chain)
        if (const auto* acc = model.cluster_stats().find(node, item))
            with_item.push_back({model.hierarchy().tree.member_count(node), acc->count});
    REQUIRE(with_item.size() == 3);
    CHECK(with_item[0] == std::pair<std::size_t, std::uint32_t>{7, 6});
    CHECK(with_item[1] == std::pair<std::size_t, std::uint32_t>{16, 15});
    CHECK(with_item[2] == std::pair<std::size_t, std::uint32_t>{22, 21});

    const auto choice = select_optimal_cluster(chain, item, model.cluster_stats(), model.t_table());
    REQUIRE(choice.has_value());
    CHECK(choice->count == 15);
    CHECK(choice->mean == doctest::Approx(2.8).epsilon(1e-12));
    CHECK(choice->half_width == doctest::Approx(0.49972).epsilon(1e-4));

    const auto p = model.predict(user, item);
    CHECK(p.fallback == Fallback::none);
    CHECK(p.user_mean == doctest::Approx(3.4).epsilon(1e-12));
    // 0.5 * 3.4 + 0.5 * 2.8
    CHECK(p.value == doctest::Approx(3.1).epsilon(1e-12));
    CHECK(p.chosen_node == choice->node);

    CobarConfig only_user;
    only_user.gamma = 1.0;
    CHECK(CobarModel(d, only_user).predict(user, item).value == doctest::Approx(3.4).epsilon(1e-12));
    CobarConfig only_cluster;
    only_cluster.gamma = 0.0;
    CHECK(CobarModel(d, only_cluster).predict(user, item).value == doctest::Approx(2.8).epsilon(1e-12));
}

TEST_CASE("no interval when the chain holds fewer than two ratings") {
    const auto d = RatingDataset::from_triples({"a", "b", "c"}, {"x", "y", "z"},
                                               {{0, 0, 4.0}, {1, 0, 2.0}, {1, 1, 5.0}, {2, 2, 3.0}});
    const CobarModel model(d);
    const auto p = model.predict(0, 1);
    CHECK_FALSE(p.cluster.has_value());
    CHECK(p.fallback == Fallback::single_rating);
    CHECK(p.value == 4.0);

    const auto train = RatingDataset::from_triples({"a", "b", "c"}, {"x", "y", "z"},
                                                   {{0, 0, 4.0}, {1, 0, 2.0}, {2, 2, 3.0}});
    const CobarModel cold(train);
    const auto q = cold.predict(0, 1);
    CHECK(q.fallback == Fallback::cold_item);
    CHECK(q.value == 4.0);
}

TEST_CASE("cold users get the global mean") {
    const auto d = RatingDataset::from_triples({"a", "b", "c"}, {"x", "y"},
                                               {{0, 0, 4.0}, {1, 0, 2.0}, {1, 1, 5.0}});
    const CobarModel model(d);
    const auto p = model.predict(2, 0);
    CHECK(p.fallback == Fallback::cold_user);
    CHECK(p.value == doctest::Approx(11.0 / 3.0).epsilon(1e-15));
    CHECK(model.chain_of(2).empty());
    CHECK_THROWS_AS(model.predict(3, 0), std::out_of_range);
    CHECK_THROWS_AS(model.predict(0, 2), std::out_of_range);
}

TEST_CASE("equal half-widths resolve to the smaller cluster") {
    // a and b share a vector; every rating of x is 5 so each interval is 0
    const auto d = RatingDataset::from_triples({"a", "b", "c"}, {"p", "q", "x"},
                                               {{0, 0, 4.0}, {0, 2, 5.0}, {1, 0, 4.0}, {1, 2, 5.0},
                                                {2, 1, 2.0}, {2, 2, 5.0}});
    const CobarModel small(d);
    const auto chain = small.chain_of(0);
    REQUIRE(chain.size() == 3);
    auto choice = select_optimal_cluster(chain, 2, small.cluster_stats(), small.t_table());
    REQUIRE(choice);
    CHECK(choice->node == chain[1]);
    CHECK(choice->half_width == 0.0);
    choice = select_optimal_cluster(chain, 2, small.cluster_stats(), small.t_table(), TieBreak::largest_cluster);
    REQUIRE(choice);
    CHECK(choice->node == chain[2]);
}

TEST_CASE("predictions agree exactly with exhaustive enumeration") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        testing::RandomDatasetSpec spec;
        spec.allow_empty_users = seed % 3 == 0;
        spec.density = 0.3 + 0.05 * static_cast<double>(seed % 6);
        const auto d = testing::random_dataset(seed + 500, spec);
        CobarConfig cfg;
        cfg.gamma = 0.25 * static_cast<double>(seed % 5);
        cfg.clamp = seed % 2 == 0;
        const CobarModel model(d, cfg);
        const auto& h = model.hierarchy();
        for (UserIndex u = 0; u < d.num_users(); ++u) {
            for (ItemIndex i = 0; i < d.num_items(); ++i) {
                const double expect = testing::brute_force_cobar(d, h.tree.leaf_count(), h.tree.merges(),
                                                                 h.user_of_leaf, u, i, cfg.gamma, 0.95, cfg.clamp);
                CAPTURE(seed);
                CAPTURE(u);
                CAPTURE(i);
                CHECK(model.predict(u, i).value == expect);
            }
        }
    }
}

TEST_CASE("unclamped blend lies between its two terms") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto d = testing::random_dataset(seed + 900);
        CobarConfig cfg;
        cfg.clamp = false;
        cfg.gamma = 0.3;
        const CobarModel model(d, cfg);
        for (UserIndex u = 0; u < d.num_users(); ++u) {
            for (ItemIndex i = 0; i < d.num_items(); ++i) {
                const auto p = model.predict(u, i);
                if (!p.cluster) {
                    CHECK(p.value == p.user_mean);
                    continue;
                }
                CHECK(p.value >= std::min(p.user_mean, p.cluster->mean) - 1e-12);
                CHECK(p.value <= std::max(p.user_mean, p.cluster->mean) + 1e-12);
                CHECK(p.cluster->count >= 2);
            }
        }
    }
}

TEST_CASE("config validation") {
    CobarConfig c;
    c.gamma = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.gamma = -0.1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.gamma = 0.5;
    c.confidence_level = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.confidence_level = 0.9;
    CHECK_NOTHROW(c.validate());
}
