#include "ctq/generator.hpp"

#include <gtest/gtest.h>

#include <set>

namespace ctq {
namespace {

TEST(Generate, NoUsers) {
    GenSpec s;
    s.n_users = 0;
    const auto g = generate(s);
    EXPECT_TRUE(g.dataset.trajectories.empty());
    EXPECT_TRUE(g.contacts.empty());
    EXPECT_EQ(g.dataset.window_days, 14);
}

TEST(Generate, SameSeedSameData) {
    GenSpec s;
    s.n_users = 200;
    s.random_plants = 20;
    const auto a = generate(s);
    const auto b = generate(s);
    ASSERT_EQ(a.dataset.trajectories.size(), b.dataset.trajectories.size());
    for (std::size_t i = 0; i < a.dataset.trajectories.size(); ++i)
        EXPECT_EQ(a.dataset.trajectories[i].points, b.dataset.trajectories[i].points);
    EXPECT_EQ(a.contacts, b.contacts);

    s.seed = 2;
    EXPECT_NE(generate(s).dataset.trajectories[0].points, a.dataset.trajectories[0].points);
}

TEST(Generate, RespectsShapeParameters) {
    GenSpec s;
    s.n_users = 300;
    s.min_points = 5;
    s.max_points = 12;
    s.extent = 1000;
    s.duration = 86400;
    s.min_active = 3600;
    s.max_active = 7200;
    s.first_user = 100;
    const auto g = generate(s);
    ASSERT_EQ(g.dataset.trajectories.size(), 300u);
    EXPECT_NO_THROW(validate(g.dataset));
    for (std::size_t i = 0; i < g.dataset.trajectories.size(); ++i) {
        const auto& t = g.dataset.trajectories[i];
        EXPECT_EQ(t.user, 100 + i);
        EXPECT_GE(t.points.size(), 5u);
        EXPECT_LE(t.points.size(), 12u);
        EXPECT_LE(t.points.back().t - t.points.front().t, 7200);
        for (const auto& p : t.points) {
            EXPECT_GE(p.x, 0);
            EXPECT_LE(p.x, 1000);
            EXPECT_GE(p.t, 0);
            EXPECT_LE(p.t, 86400);
        }
    }
}

TEST(Generate, StepLengthsFollowTheMean) {
    GenSpec s;
    s.n_users = 200;
    s.extent = 1e7; // reflections are negligible
    s.mean_step = 250;
    const auto g = generate(s);
    double sum = 0;
    std::size_t n = 0;
    for (const auto& t : g.dataset.trajectories)
        for (std::size_t i = 1; i < t.points.size(); ++i, ++n)
            sum += spatial_dist(t.points[i - 1], t.points[i]);
    EXPECT_NEAR(sum / static_cast<double>(n), 250, 10);
}

TEST(Generate, PlantedContactsAreDirectContacts) {
    GenSpec s;
    s.n_users = 120;
    s.planted = {{1, 2, 100, 200, 5000}, {7, 3}};
    s.planted[1].t = 9000;
    s.random_plants = 15;
    const auto g = generate(s);
    ASSERT_EQ(g.contacts.size(), 17u);
    EXPECT_EQ(g.contacts[0].x, 100);
    EXPECT_FALSE(std::isnan(g.contacts[1].x));
    for (const auto& c : g.contacts) {
        const auto& ta = g.dataset.trajectories[c.a - 1];
        const auto& tb = g.dataset.trajectories[c.b - 1];
        EXPECT_TRUE(meets(tb, ta, s.plant_psi, s.plant_tau).has_value()) << c.a << "-" << c.b;
        const auto found = oracle_ctq(g.dataset, ta, {s.plant_psi, s.plant_tau, 1});
        std::set<UserId> users;
        for (const auto& r : found)
            users.insert(r.user);
        EXPECT_TRUE(users.count(c.b)) << c.a << "-" << c.b;
    }
}

TEST(Generate, PlantedChainIsTracedLevelByLevel) {
    GenSpec s;
    s.n_users = 50;
    s.extent = 100000;
    s.planted = {{1, 2, 5000, 5000, 1000}, {2, 3, 90000, 90000, 50000}};
    s.plant_tau = 0;
    const auto g = generate(s);
    const auto r = oracle_ctq(g.dataset, g.dataset.trajectories[0], {2, 0, 2});
    std::map<UserId, std::uint32_t> level;
    for (const auto& e : r)
        level[e.user] = e.level;
    EXPECT_EQ(level.at(2), 0u);
    EXPECT_EQ(level.at(3), 1u);
}

TEST(Generate, RejectsPlantsWithUnknownUsers) {
    GenSpec s;
    s.n_users = 10;
    s.planted = {{1, 11}};
    EXPECT_THROW(generate(s), std::invalid_argument);
    s.planted = {{4, 4}};
    EXPECT_THROW(generate(s), std::invalid_argument);
    s.planted = {{0, 4}};
    EXPECT_THROW(generate(s), std::invalid_argument);
}

} // namespace
} // namespace ctq
