#include "ctq/qr_index.hpp"

#include "ctq/checks.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

namespace ctq {
namespace {

using testing::traj;

QrParams figure_params() {
    QrParams p;
    p.theta = 2;
    p.page_capacity = 2;
    p.bucket_width = 3600;
    return p;
}

std::set<UserId> members_of(const QRIndex& index, PageId page) {
    for (const auto& a : index.assignments)
        if (a.page_id == page)
            return {a.members.begin(), a.members.end()};
    return {};
}

PageId page_holding(const QRIndex& index, UserId u) {
    for (const auto& a : index.assignments)
        if (std::find(a.members.begin(), a.members.end(), u) != a.members.end())
            return a.page_id;
    ADD_FAILURE() << "user " << u << " is on no page";
    return 0;
}

TEST(BuildQr, FigureGroupsTheTwoClusters) {
    const auto index = build_qr(testing::figure_dataset(), figure_params());
    ASSERT_EQ(page_count(index), 2u);
    const PageId r1 = page_holding(index, 1);
    const PageId r2 = page_holding(index, 3);
    EXPECT_NE(r1, r2);
    EXPECT_EQ(members_of(index, r1), (std::set<UserId>{1, 2}));
    EXPECT_EQ(members_of(index, r2), (std::set<UserId>{3, 4}));
}

TEST(BuildQr, FigureRegistryRecordsBucketRanges) {
    const auto index = build_qr(testing::figure_dataset(), figure_params());
    const auto b = leaves_in_z_order(index.tree);
    ASSERT_EQ(b.size(), 7u);
    const PageId r1 = page_holding(index, 1);
    const PageId r2 = page_holding(index, 3);

    // b5 holds u3 at t5 and u4 at t8: one entry spanning buckets 4..7.
    ASSERT_EQ(index.registry[b[4]].size(), 1u);
    EXPECT_EQ(index.registry[b[4]][0], (RegistryEntry{r2, 4, 7}));
    EXPECT_EQ(leaf_lookup(index, b[4], 5), std::vector<PageId>{r2});
    EXPECT_TRUE(leaf_lookup(index, b[4], 3).empty());
    EXPECT_TRUE(leaf_lookup(index, b[4], 8).empty());

    // b1 holds u1 at t1 and u2 at t2.
    ASSERT_EQ(index.registry[b[0]].size(), 1u);
    EXPECT_EQ(index.registry[b[0]][0], (RegistryEntry{r1, 0, 1}));
    // b6 and b7 are u3's and u4's alone.
    EXPECT_EQ(index.registry[b[5]], (std::vector<RegistryEntry>{{r2, 5, 5}}));
    EXPECT_EQ(index.registry[b[6]], (std::vector<RegistryEntry>{{r2, 6, 6}}));
}

TEST(BuildQr, InternalNodesHaveNoRegistry) {
    const auto index = build_qr(testing::figure_dataset(), figure_params());
    ASSERT_EQ(index.registry.size(), index.tree.nodes.size());
    for (NodeId id = 0; id < index.tree.nodes.size(); ++id)
        if (!index.tree.nodes[id].is_leaf()) {
            EXPECT_TRUE(index.registry[id].empty());
        }
    EXPECT_THROW(leaf_lookup(index, static_cast<NodeId>(index.tree.nodes.size()), 0), std::out_of_range);
}

TEST(BuildQr, EveryPointIsFoundThroughItsLeafAndBucket) {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 5; ++round) {
        const auto d = testing::random_walk_dataset(rng, 300, 40, 5000, 150, 86400);
        QrParams p;
        p.theta = 16;
        p.page_capacity = 1 + round;
        p.bucket_width = 900;
        const auto index = build_qr(d, p);
        for (const auto& t : d.trajectories) {
            const PageId page = page_holding(index, t.user);
            for (const auto& pt : t.points) {
                const auto pages = leaf_lookup(index, locate_leaf(index.tree, pt), bucket_of(index.bucketing, pt.t));
                EXPECT_NE(std::find(pages.begin(), pages.end(), page), pages.end()) << "user " << t.user;
            }
        }
        EXPECT_TRUE(check_qr(index, d.trajectories).empty());
    }
}

TEST(BuildQr, PagesPartitionUsersWithinCapacity) {
    std::mt19937_64 rng(5);
    const auto d = testing::random_dataset(rng, {.users = 103, .max_points = 8});
    QrParams p;
    p.page_capacity = 4;
    const auto index = build_qr(d, p);
    EXPECT_EQ(page_count(index), 26u);
    std::multiset<UserId> seen;
    for (const auto& a : index.assignments) {
        EXPECT_GE(a.members.size(), 1u);
        EXPECT_LE(a.members.size(), 4u);
        seen.insert(a.members.begin(), a.members.end());
    }
    std::multiset<UserId> expected;
    for (const auto& t : d.trajectories)
        expected.insert(t.user);
    EXPECT_EQ(seen, expected);
    EXPECT_EQ(index.pages->page_count(), 26u);
    EXPECT_TRUE(index.pages->sealed());
}

TEST(BuildQr, EmptyDatasetGivesOneEmptyLeaf) {
    const auto index = build_qr(Dataset{});
    EXPECT_EQ(index.tree.nodes.size(), 1u);
    EXPECT_EQ(page_count(index), 0u);
    EXPECT_TRUE(leaf_lookup(index, 0, 0).empty());
}

TEST(BuildQr, RejectsBadParameters) {
    const auto d = testing::figure_dataset();
    EXPECT_THROW(build_qr(d, {.theta = 0}), std::invalid_argument);
    EXPECT_THROW(build_qr(d, {.page_capacity = 0}), std::invalid_argument);
    EXPECT_THROW(build_qr(d, {.bucket_width = 0}), std::invalid_argument);
    EXPECT_THROW(build_qr(d, {.max_depth = 32}), std::invalid_argument);
}

TEST(GroupTrajectories, TransformedNeighboursShareAPage) {
    // Two tight clusters far apart on the spatial axis.
    std::vector<TransformedMBR> mbrs{
        {100, 110, 1, 2, 1}, {1000, 1010, 1, 2, 2}, {105, 112, 1, 3, 3}, {1003, 1011, 2, 2, 4},
    };
    const auto groups = group_trajectories(mbrs, 2);
    ASSERT_EQ(groups.size(), 2u);
    std::set<std::set<UserId>> got;
    for (const auto& g : groups)
        got.insert({g.members.begin(), g.members.end()});
    EXPECT_EQ(got, (std::set<std::set<UserId>>{{1, 3}, {2, 4}}));
}

TEST(GroupTrajectories, Empty) { EXPECT_TRUE(group_trajectories({}, 4).empty()); }

// --- restricted partitions --------------------------------------------------

TEST(RestrictQuadtree, KeepsGlobalCellsAndSplitsOnlyOccupiedBlocks) {
    std::mt19937_64 rng(3);
    const auto d = testing::random_dataset(rng, {.users = 200, .max_points = 10, .extent = 1000});
    std::vector<const Trajectory*> all;
    for (const auto& t : d.trajectories)
        all.push_back(&t);
    const auto global = build_quadtree(detail::flatten(all), 8, 16, bounding_region(d.trajectories));

    const std::vector<const Trajectory*> subset(all.begin(), all.begin() + 15);
    const auto pts = detail::flatten(subset);
    const auto local = detail::restrict_quadtree(global, pts);

    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, const QuadNode*> by_cell;
    for (const auto& n : global.nodes)
        by_cell[{n.depth, n.cx, n.cy}] = &n;
    std::uint64_t leaf_points = 0;
    for (const auto& n : local.nodes) {
        auto it = by_cell.find({n.depth, n.cx, n.cy});
        ASSERT_NE(it, by_cell.end());
        EXPECT_EQ(n.region, it->second->region);
        if (n.is_leaf()) {
            leaf_points += n.point_count;
        } else {
            EXPECT_FALSE(it->second->is_leaf());
            EXPECT_GE(n.point_count, 1u);
        }
    }
    EXPECT_EQ(leaf_points, pts.size());
    EXPECT_LT(local.nodes.size(), global.nodes.size());

    // A point's local leaf is its global leaf.
    for (const auto& p : pts)
        EXPECT_EQ(local.nodes[locate_leaf(local, p)].spatial_id(), global.nodes[locate_leaf(global, p)].spatial_id());
}

TEST(RestrictQuadtree, NoPointsLeavesTheRootUnsplit) {
    const auto d = testing::figure_dataset();
    std::vector<const Trajectory*> all;
    for (const auto& t : d.trajectories)
        all.push_back(&t);
    const auto global = build_quadtree(detail::flatten(all), 2, 16, bounding_region(d.trajectories));
    const auto local = detail::restrict_quadtree(global, {});
    ASSERT_EQ(local.nodes.size(), 1u);
    EXPECT_TRUE(local.nodes[0].is_leaf());
    EXPECT_EQ(local.nodes[0].point_count, 0u);

    const std::vector<TrajPoint> outside{{100, 100, 0}};
    EXPECT_THROW(detail::restrict_quadtree(global, outside), std::out_of_range);
}

TEST(RestrictQuadtree, OnlyTheOccupiedQuadrantIsRefined) {
    // The figure splits Q2 only; restricting to u3 keeps Q2's children
    // because u3 has a sample there, restricting to u2's first sample does not.
    const auto d = testing::figure_dataset();
    std::vector<const Trajectory*> all;
    for (const auto& t : d.trajectories)
        all.push_back(&t);
    const auto global = build_quadtree(detail::flatten(all), 2, 16, bounding_region(d.trajectories));
    const std::vector<TrajPoint> in_q1{{1.5, 1.5, 0}};
    EXPECT_EQ(detail::restrict_quadtree(global, in_q1).nodes.size(), 5u);
    const std::vector<TrajPoint> in_q2{{7.0, 3.0, 0}};
    EXPECT_EQ(detail::restrict_quadtree(global, in_q2).nodes.size(), 9u);
}

// --- Q2R-tree -----------------------------------------------------------------

/// Owner by direct descent: follow the child block containing the whole
/// extent until none does or the node is a leaf.
NodeId expected_owner(const Q2RIndex& index, const Trajectory& t) {
    const auto box = spatial_box(t);
    NodeId id = 0;
    while (!index.nodes[id].is_leaf()) {
        NodeId next = kNoNode;
        for (NodeId c = 0; c < 4; ++c) {
            const auto& r = index.nodes[index.nodes[id].first_child + c].block;
            const bool lo = box.min_x >= r.min_x && box.min_y >= r.min_y;
            const bool hx = box.max_x < r.max_x || (r.max_x == index.root_region.max_x && box.max_x <= r.max_x);
            const bool hy = box.max_y < r.max_y || (r.max_y == index.root_region.max_y && box.max_y <= r.max_y);
            if (lo && hx && hy) {
                next = index.nodes[id].first_child + c;
                break;
            }
        }
        if (next == kNoNode)
            break;
        id = next;
    }
    return id;
}

TEST(BuildQ2r, OwnersAreTheSmallestContainingBlocks) {
    std::mt19937_64 rng(21);
    const auto d = testing::random_walk_dataset(rng, 2000, 30, 20000, 300, 86400);
    Q2rParams p;
    p.theta_traj = 16;
    p.qr.theta = 32;
    const auto index = build_q2r(d, p);
    ASSERT_GT(index.nodes.size(), 1u);
    for (const auto& t : d.trajectories)
        EXPECT_EQ(owner_node(index, t.user), expected_owner(index, t)) << "user " << t.user;
    EXPECT_TRUE(check_q2r(index, d).empty());
}

TEST(BuildQ2r, SplitsOnlyWhenEnoughTrajectoriesMoveDown) {
    std::mt19937_64 rng(22);
    const auto d = testing::random_walk_dataset(rng, 500, 20, 20000, 200, 86400);
    Q2rParams p;
    p.theta_traj = 16;
    const auto index = build_q2r(d, p);
    for (NodeId id = 0; id < index.nodes.size(); ++id) {
        const auto& n = index.nodes[id];
        EXPECT_EQ(n.qr.has_value(), !n.owned.empty());
        if (n.is_leaf())
            continue;
        // Every trajectory below an internal node was pushable from it.
        std::size_t below = 0;
        std::vector<NodeId> stack{n.first_child, n.first_child + 1, n.first_child + 2, n.first_child + 3};
        while (!stack.empty()) {
            const auto& c = index.nodes[stack.back()];
            stack.pop_back();
            below += c.owned.size();
            if (!c.is_leaf())
                for (NodeId k = 0; k < 4; ++k)
                    stack.push_back(c.first_child + k);
        }
        EXPECT_GT(below, p.theta_traj);
    }
}

TEST(BuildQ2r, RegionSpanningTrajectoryStaysAtTheRoot) {
    std::mt19937_64 rng(23);
    auto d = testing::random_walk_dataset(rng, 400, 20, 1000, 30, 86400);
    d.trajectories.push_back(traj(999999, {{0, 0, 0}, {1000, 1000, 10}}));
    Q2rParams p;
    p.theta_traj = 8;
    const auto index = build_q2r(d, p);
    ASSERT_FALSE(index.nodes[0].is_leaf());
    EXPECT_EQ(owner_node(index, 999999), 0u);
    EXPECT_EQ(owner_node(index, 123456789), kNoNode);
}

TEST(BuildQ2r, BlocksShareTheGlobalCells) {
    std::mt19937_64 rng(24);
    const auto d = testing::random_walk_dataset(rng, 1500, 30, 20000, 400, 86400);
    Q2rParams p;
    p.theta_traj = 32;
    p.qr.theta = 16;
    const auto index = build_q2r(d, p);
    std::map<UserId, const Trajectory*> by_user;
    for (const auto& t : d.trajectories)
        by_user[t.user] = &t;

    // A location maps to the same spatial cell in every owning block.
    std::vector<TrajPoint> probe;
    for (const auto& t : d.trajectories)
        probe.push_back(t.points.front());
    for (const auto& p0 : probe) {
        std::optional<SpatialId> seen;
        for (const auto& n : index.nodes) {
            if (!n.qr)
                continue;
            const auto& tree = n.qr->tree;
            const NodeId leaf = locate_leaf(tree, p0);
            if (tree.nodes[leaf].point_count == 0)
                continue;
            const auto id = tree.nodes[leaf].spatial_id();
            if (seen) {
                EXPECT_EQ(*seen, id);
            }
            seen = id;
        }
    }
}

TEST(BuildQ2r, SharesOnePageStore) {
    std::mt19937_64 rng(25);
    const auto d = testing::random_walk_dataset(rng, 300, 10, 5000, 100, 86400);
    const auto index = build_q2r(d, Q2rParams{.qr = {}, .theta_traj = 8});
    std::size_t pages = 0;
    for (const auto& n : index.nodes)
        if (n.qr) {
            EXPECT_EQ(n.qr->pages, index.pages);
            pages += page_count(*n.qr);
        }
    EXPECT_EQ(pages, index.pages->page_count());
}

TEST(RouteQ2r, VisitsAncestorsFirstAndSkipsDistantBlocks) {
    std::mt19937_64 rng(26);
    const auto d = testing::random_walk_dataset(rng, 1000, 10, 20000, 50, 86400);
    const auto index = build_q2r(d, Q2rParams{.qr = {}, .theta_traj = 8});
    const auto q = traj(0, {{10, 10, 0}});
    const auto routed = route_q2r(index, q, 2);
    std::size_t owning = 0;
    for (const auto& n : index.nodes) {
        if (!n.qr)
            continue;
        ++owning;
        const bool expected = n.block.intersects(embr(q.points[0], 2));
        const bool got = std::find(routed.begin(), routed.end(), &*n.qr) != routed.end();
        EXPECT_EQ(got, expected);
    }
    EXPECT_LT(routed.size(), owning);
}

TEST(Embr, CoversThePsiSquareWithSlack) {
    const auto r = embr({10, -5, 0}, 2);
    EXPECT_LT(r.min_x, 8);
    EXPECT_GT(r.max_x, 12);
    EXPECT_LT(r.min_y, -7);
    EXPECT_GT(r.max_y, -3);
    EXPECT_NEAR(r.max_x - r.min_x, 4, 1e-6);
}

} // namespace
} // namespace ctq
