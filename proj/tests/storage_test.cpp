#include "ctq/storage.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

namespace ctq {
namespace {

using testing::traj;

TEST(PageStore, IdsAreDenseFromZero) {
    PageStore store;
    const std::vector<Trajectory> one{traj(1, {{0, 0, 0}})};
    EXPECT_EQ(store.write_page(one), 0u);
    EXPECT_EQ(store.write_page(one), 1u);
    EXPECT_EQ(store.write_page({}), 2u);
    EXPECT_EQ(store.page_count(), 3u);
}

TEST(PageStore, PagesHoldCompleteTrajectories) {
    PageStore store;
    const std::vector<Trajectory> page{traj(7, {{1.25, -3.5, 10}, {2, 2, 20}}), traj(9, {{0, 0, -5}})};
    const auto id = store.write_page(page);
    const auto back = store.peek_page(id);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].user, 7u);
    EXPECT_EQ(back[0].points, page[0].points);
    EXPECT_EQ(back[1].points, page[1].points);
}

TEST(PageStore, EncodedSizeIsExact) {
    PageStore store;
    const std::vector<Trajectory> page{traj(1, {{0, 0, 0}, {1, 1, 1}}), traj(2, {{0, 0, 0}})};
    store.write_page(page);
    // page count, then per trajectory: user, point count, 3 x 8 bytes per point
    EXPECT_EQ(store.total_bytes(), 8u + 2 * 16u + 3 * 24u);
}

TEST(QueryScope, CountsRawAndUniqueReadsSeparately) {
    PageStore store;
    const std::vector<Trajectory> one{traj(1, {{0, 0, 0}})};
    store.write_page(one);
    store.write_page(one);
    store.seal();

    QueryScope scope;
    store.read_page(0, scope);
    store.read_page(1, scope);
    store.read_page(0, scope);
    store.read_page(0, scope);
    EXPECT_EQ(scope.counter().raw_reads, 4u);
    EXPECT_EQ(scope.counter().unique_reads_this_query, 2u);
    EXPECT_TRUE(scope.touched(1));

    scope.reset();
    EXPECT_EQ(scope.counter().raw_reads, 0u);
    EXPECT_FALSE(scope.touched(0));
    store.read_page(1, scope);
    EXPECT_EQ(scope.counter().unique_reads_this_query, 1u);
    EXPECT_EQ(store.total_raw_reads(), 5u);
}

TEST(QueryScope, PeekIsNotCounted) {
    PageStore store;
    store.write_page(std::vector<Trajectory>{traj(1, {{0, 0, 0}})});
    store.peek_page(0);
    EXPECT_EQ(store.total_raw_reads(), 0u);
}

TEST(PageStore, SealedStoreRejectsWrites) {
    PageStore store;
    store.seal();
    EXPECT_TRUE(store.sealed());
    EXPECT_THROW(store.write_page({}), std::logic_error);
    EXPECT_THROW(store.append_raw("x"), std::logic_error);
}

TEST(PageStore, UnknownPageThrows) {
    PageStore store;
    QueryScope scope;
    EXPECT_THROW(store.peek_page(0), std::out_of_range);
    store.write_page({});
    EXPECT_THROW(store.read_page(1, scope), std::out_of_range);
    EXPECT_EQ(scope.counter().raw_reads, 0u);
}

TEST(PageStore, MalformedRawPayloadIsRejected) {
    PageStore store;
    ByteWriter w;
    encode_trajectories(w, std::vector<Trajectory>{traj(1, {{0, 0, 0}})});
    std::string bytes = std::move(w).str();
    store.append_raw(bytes + "junk");
    store.append_raw(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(store.peek_page(0), FormatError);
    EXPECT_THROW(store.peek_page(1), FormatError);
}

TEST(PageStore, ImplausibleCountIsRejectedBeforeAllocating) {
    ByteWriter w;
    w.u64(std::uint64_t{1} << 60);
    PageStore store;
    store.append_raw(std::move(w).str());
    EXPECT_THROW(store.peek_page(0), FormatError);
}

TEST(DumpTrajectories, ReturnsEveryStoredTrajectoryInPageOrder) {
    PageStore store;
    store.write_page(std::vector<Trajectory>{traj(3, {{0, 0, 0}}), traj(1, {{0, 0, 0}})});
    store.write_page(std::vector<Trajectory>{traj(2, {{0, 0, 0}})});
    const auto all = dump_trajectories(store);
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[0].user, 3u);
    EXPECT_EQ(all[1].user, 1u);
    EXPECT_EQ(all[2].user, 2u);
    EXPECT_EQ(store.total_raw_reads(), 0u);
}

} // namespace
} // namespace ctq
