#include "ctq/ingest.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace ctq {
namespace {

IngestResult ingest_text(const std::string& text, IngestOptions opts = {}) {
    std::istringstream in(text);
    return ingest_csv(in, opts);
}

TEST(IngestCsv, ThreeRowFixture) {
    const auto r = ingest_text("user_id,x,y,t\n2,10.5,20,100\n1,0,0,50\n2,11,21,40\n");
    EXPECT_EQ(r.rows_read, 3u);
    EXPECT_EQ(r.rows_skipped, 0u);
    ASSERT_EQ(r.dataset.trajectories.size(), 2u);
    EXPECT_EQ(r.dataset.trajectories[0].user, 1u);
    EXPECT_EQ(r.dataset.trajectories[1].user, 2u);
    const std::vector<TrajPoint> two{{11, 21, 40}, {10.5, 20, 100}};
    EXPECT_EQ(r.dataset.trajectories[1].points, two);
    EXPECT_EQ(r.dataset.window_days, 1);
    EXPECT_EQ(r.convention, IngestConvention{});
}

TEST(IngestCsv, HeaderlessInputUsesDefaultColumns) {
    const auto r = ingest_text("7,1,2,3\n");
    ASSERT_EQ(r.dataset.trajectories.size(), 1u);
    EXPECT_EQ(r.dataset.trajectories[0].points, (std::vector<TrajPoint>{{1, 2, 3}}));
}

TEST(IngestCsv, HeaderMayReorderColumns) {
    const auto r = ingest_text("timestamp, Y ,user,X\n100,2,5,1\n");
    ASSERT_EQ(r.dataset.trajectories.size(), 1u);
    EXPECT_EQ(r.dataset.trajectories[0].user, 5u);
    EXPECT_EQ(r.dataset.trajectories[0].points, (std::vector<TrajPoint>{{1, 2, 100}}));
}

TEST(IngestCsv, DuplicateTimestampsKeepInputOrder) {
    const auto r = ingest_text("1,0,0,10\n1,5,5,10\n1,3,3,5\n1,9,9,10\n");
    const std::vector<TrajPoint> expected{{3, 3, 5}, {0, 0, 10}, {5, 5, 10}, {9, 9, 10}};
    EXPECT_EQ(r.dataset.trajectories[0].points, expected);
}

TEST(IngestCsv, MalformedRowsAreSkippedWithLineNumbers) {
    const auto r = ingest_text("user_id,x,y,t\n1,0,0,0\nbad\n1,0,zero,5\n\n1,nan,0,6\n1,0,0,7.5\n-3,0,0,1\n1,2,2,9\n");
    EXPECT_EQ(r.rows_read, 7u);
    EXPECT_EQ(r.rows_skipped, 5u);
    const std::vector<std::string> expected{"line 3: malformed row", "line 4: malformed row", "line 6: malformed row",
                                            "line 7: malformed row", "line 8: malformed row"};
    EXPECT_EQ(r.problems, expected);
    EXPECT_EQ(r.dataset.trajectories[0].points.size(), 2u);
}

TEST(IngestCsv, CrLfAndSpacesAreTolerated) {
    const auto r = ingest_text("user_id,x,y,t\r\n 1 , 2.5 ,3,\t4\r\n");
    EXPECT_EQ(r.rows_skipped, 0u);
    EXPECT_EQ(r.dataset.trajectories[0].points, (std::vector<TrajPoint>{{2.5, 3, 4}}));
}

TEST(IngestCsv, NoValidRowsIsAnError) {
    EXPECT_THROW(ingest_text(""), IngestError);
    EXPECT_THROW(ingest_text("user_id,x,y,t\n"), IngestError);
    EXPECT_THROW(ingest_text("garbage\n"), IngestError);
}

TEST(IngestCsv, MissingFileIsAnError) {
    IngestOptions opts;
    opts.path = "/nonexistent/ctq/input.csv";
    EXPECT_THROW(ingest_csv(opts), IngestError);
}

TEST(IngestCsv, EpochShiftAndWindow) {
    IngestOptions opts;
    opts.epoch = EpochPolicy::shift_to_min;
    const auto r = ingest_text("1,0,0,1700000100\n1,0,0,1700000000\n2,0,0,1700259200\n", opts);
    EXPECT_EQ(r.convention.time_offset, 1700000000);
    EXPECT_EQ(r.dataset.trajectories[0].points.front().t, 0);
    EXPECT_EQ(r.dataset.trajectories[1].points.front().t, 259200);
    EXPECT_EQ(r.dataset.window_days, 4);

    opts.window_days = 14;
    EXPECT_EQ(ingest_text("1,0,0,0\n", opts).dataset.window_days, 14);
}

TEST(IngestCsv, GeographicCentroidProjectsToOrigin) {
    IngestOptions opts;
    opts.geographic = true;
    const auto r = ingest_text("user_id,lat,lon,t\n1,51.0,-1.0,0\n2,52.0,1.0,0\n", opts);
    EXPECT_DOUBLE_EQ(r.convention.lat0, 51.5);
    EXPECT_DOUBLE_EQ(r.convention.lon0, 0.0);
    const auto& a = r.dataset.trajectories[0].points[0];
    const auto& b = r.dataset.trajectories[1].points[0];
    EXPECT_NEAR(a.x + b.x, 0.0, 1e-6);
    EXPECT_NEAR(a.y + b.y, 0.0, 1e-6);
    // One degree of latitude on the mean sphere.
    EXPECT_NEAR(b.y - a.y, kEarthRadiusMeters * std::numbers::pi / 180, 1e-6);
    // Longitude shrinks by cos(lat0).
    EXPECT_NEAR(b.x - a.x, 2 * kEarthRadiusMeters * std::numbers::pi / 180 * std::cos(51.5 * std::numbers::pi / 180),
                1e-6);
    EXPECT_EQ(project(r.convention, 51.5, 0.0), (std::pair<double, double>{0.0, 0.0}));
}

TEST(IngestWithConvention, ReusesTheIndexConvention) {
    const IngestConvention c{false, 0, 0, 1000};
    std::istringstream in("1,5,5,1500\n");
    const auto r = ingest_with_convention(in, c);
    EXPECT_EQ(r.dataset.trajectories[0].points, (std::vector<TrajPoint>{{5, 5, 500}}));
    EXPECT_EQ(r.convention, c);
}

TEST(IngestWithConvention, EarlierTimestampsSignalAMismatchedEpoch) {
    const IngestConvention c{false, 0, 0, 1700000000};
    std::istringstream in("1,5,5,100\n");
    try {
        ingest_with_convention(in, c);
        FAIL() << "expected an error";
    } catch (const IngestError& e) {
        EXPECT_NE(std::string(e.what()).find("mismatched epoch"), std::string::npos);
    }
}

TEST(WriteCsv, ReadsBackExactly) {
    Dataset d;
    d.trajectories = {{3, {{0.1, 1e-300, 5}, {12345.678901234567, -0.3, 7}}}, {9, {{1.0 / 3, 2.0 / 3, 0}}}};
    std::ostringstream out;
    write_csv(out, d);
    const auto r = ingest_text(out.str());
    ASSERT_EQ(r.dataset.trajectories.size(), 2u);
    EXPECT_EQ(r.dataset.trajectories[0].points, d.trajectories[0].points);
    EXPECT_EQ(r.dataset.trajectories[1].points, d.trajectories[1].points);
}

} // namespace
} // namespace ctq
