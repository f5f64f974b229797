#ifndef CTQ_SPACETIME_HPP
#define CTQ_SPACETIME_HPP

#include "ctq/model.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

/// \file
/// Point quadtree with z-order leaf numbering, time buckets, and the
/// (spatial-id, temporal-id) transform of trajectories.

namespace ctq {

/// Largest quadtree depth whose cell codes fit in a 64-bit Morton code.
inline constexpr unsigned kMaxSupportedDepth = 31;
inline constexpr unsigned kDefaultMaxDepth = 16;
inline constexpr Seconds kDefaultBucketWidth = 3600;

/// Axis-aligned rectangle in planar meters.
struct Region {
    double min_x = 0;
    double min_y = 0;
    double max_x = 1;
    double max_y = 1;

    friend bool operator==(const Region&, const Region&) = default;

    bool valid() const { return min_x < max_x && min_y < max_y; }

    /// Closed containment test.
    bool contains(double x, double y) const {
        return x >= min_x && x <= max_x && y >= min_y && y <= max_y;
    }

    bool intersects(const Region& o) const {
        return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
    }
};

namespace detail {
inline const Trajectory& deref(const Trajectory& t) { return t; }
inline const Trajectory& deref(const Trajectory* t) { return *t; }
} // namespace detail

/// Bounding box of every sample, padded by 1% of the extent per side.
/// Degenerate extents are padded by one meter instead. Accepts a range of
/// trajectories or of pointers to trajectories.
template <class TrajRange>
Region bounding_region(const TrajRange& trajs) {
    Region r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    bool any = false;
    for (const auto& item : trajs) {
        for (const auto& p : detail::deref(item).points) {
            r.min_x = std::min(r.min_x, p.x);
            r.min_y = std::min(r.min_y, p.y);
            r.max_x = std::max(r.max_x, p.x);
            r.max_y = std::max(r.max_y, p.y);
            any = true;
        }
    }
    if (!any)
        return Region{};
    auto pad = [](double lo, double hi) {
        const double extent = hi - lo;
        return extent > 0 ? extent * 0.01 : 1.0;
    };
    const double px = pad(r.min_x, r.max_x);
    const double py = pad(r.min_y, r.max_y);
    return Region{r.min_x - px, r.min_y - py, r.max_x + px, r.max_y + py};
}

/// Interleaves the bits of a cell index: `cx` lands on even bit positions,
/// `cy` on odd ones (least significant first).
inline std::uint64_t morton_encode(std::uint32_t cx, std::uint32_t cy, unsigned depth = kMaxSupportedDepth) {
    if (depth > kMaxSupportedDepth)
        throw std::out_of_range("morton depth exceeds " + std::to_string(kMaxSupportedDepth));
    const std::uint64_t limit = std::uint64_t{1} << depth;
    if (cx >= limit || cy >= limit)
        throw std::out_of_range("cell index out of range for depth " + std::to_string(depth));

    auto spread = [](std::uint64_t v) {
        v = (v | (v << 16)) & 0x0000FFFF0000FFFFull;
        v = (v | (v << 8)) & 0x00FF00FF00FF00FFull;
        v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0Full;
        v = (v | (v << 2)) & 0x3333333333333333ull;
        v = (v | (v << 1)) & 0x5555555555555555ull;
        return v;
    };
    return spread(cx) | (spread(cy) << 1);
}

/// Z-curve number of a quadtree block.
struct SpatialId {
    std::uint64_t code = 0; ///< Morton code of the block's cell at its own depth
    std::uint32_t depth = 0;

    friend auto operator<=>(const SpatialId&, const SpatialId&) = default;

    /// Code shifted so that blocks of different depth compare in z-order.
    std::uint64_t aligned(unsigned max_depth) const { return code << (2 * (max_depth - depth)); }
};

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

struct QuadNode {
    Region region;
    std::uint32_t depth = 0;
    std::uint32_t cx = 0; ///< cell column at `depth`
    std::uint32_t cy = 0; ///< cell row at `depth`
    NodeId first_child = kNoNode; ///< children occupy [first_child, first_child + 4) in z-order
    std::uint64_t point_count = 0;

    friend bool operator==(const QuadNode&, const QuadNode&) = default;

    bool is_leaf() const { return first_child == kNoNode; }
    SpatialId spatial_id() const { return {morton_encode(cx, cy, depth), depth}; }
};

/// Quadrant index of (x, y) relative to the split point: bit 0 is set on the
/// high-x side, bit 1 on the high-y side. Min edges are closed.
inline unsigned quadrant_of(const Region& r, double x, double y) {
    const double mx = (r.min_x + r.max_x) / 2;
    const double my = (r.min_y + r.max_y) / 2;
    return (x >= mx ? 1u : 0u) | (y >= my ? 2u : 0u);
}

inline Region child_region(const Region& r, unsigned quadrant) {
    const double mx = (r.min_x + r.max_x) / 2;
    const double my = (r.min_y + r.max_y) / 2;
    Region c = r;
    if (quadrant & 1u)
        c.min_x = mx;
    else
        c.max_x = mx;
    if (quadrant & 2u)
        c.min_y = my;
    else
        c.max_y = my;
    return c;
}

/// Region quadtree over a static point set. Node 0 is the root; each internal
/// node has exactly four children stored contiguously in z-order.
struct QuadTree {
    Region root_region;
    std::uint32_t capacity = 128;
    std::uint32_t max_depth = kDefaultMaxDepth;
    std::vector<QuadNode> nodes;

    friend bool operator==(const QuadTree&, const QuadTree&) = default;

    NodeId root() const { return 0; }
    const QuadNode& node(NodeId id) const { return nodes.at(id); }

    std::array<NodeId, 4> children(NodeId id) const {
        const NodeId f = nodes[id].first_child;
        return {f, f + 1, f + 2, f + 3};
    }
};

namespace detail {

inline void split_node(QuadTree& tree, NodeId id, std::span<const TrajPoint> points,
                       std::span<std::uint32_t> refs) {
    tree.nodes[id].point_count = refs.size();
    if (refs.size() <= tree.capacity || tree.nodes[id].depth >= tree.max_depth)
        return;

    const Region region = tree.nodes[id].region;
    std::array<std::vector<std::uint32_t>, 4> parts;
    for (auto r : refs)
        parts[quadrant_of(region, points[r].x, points[r].y)].push_back(r);

    const auto first = static_cast<NodeId>(tree.nodes.size());
    const QuadNode parent = tree.nodes[id];
    tree.nodes[id].first_child = first;
    for (unsigned q = 0; q < 4; ++q) {
        QuadNode child;
        child.region = child_region(region, q);
        child.depth = parent.depth + 1;
        child.cx = parent.cx * 2 + (q & 1u);
        child.cy = parent.cy * 2 + (q >> 1);
        tree.nodes.push_back(child);
    }

    std::array<std::size_t, 5> offsets{};
    for (unsigned q = 0; q < 4; ++q) {
        std::copy(parts[q].begin(), parts[q].end(), refs.begin() + offsets[q]);
        offsets[q + 1] = offsets[q] + parts[q].size();
        parts[q] = {};
    }
    for (unsigned q = 0; q < 4; ++q)
        split_node(tree, first + q, points, refs.subspan(offsets[q], offsets[q + 1] - offsets[q]));
}

} // namespace detail

/// Builds a quadtree over `points`, splitting every block that holds more than
/// `theta` points until `max_depth` is reached.
inline QuadTree build_quadtree(std::span<const TrajPoint> points, std::uint32_t theta, std::uint32_t max_depth,
                               const Region& region) {
    if (theta < 1)
        throw std::invalid_argument("quadtree capacity must be at least 1");
    if (max_depth < 1 || max_depth > kMaxSupportedDepth)
        throw std::invalid_argument("quadtree max depth must be in [1, " + std::to_string(kMaxSupportedDepth) + "]");
    if (!region.valid())
        throw std::invalid_argument("quadtree region is empty");

    QuadTree tree;
    tree.root_region = region;
    tree.capacity = theta;
    tree.max_depth = max_depth;
    tree.nodes.push_back(QuadNode{region, 0, 0, 0, kNoNode, 0});

    std::vector<std::uint32_t> refs(points.size());
    for (std::uint32_t i = 0; i < refs.size(); ++i) {
        if (!region.contains(points[i].x, points[i].y))
            throw std::out_of_range("point lies outside the quadtree region");
        refs[i] = i;
    }
    detail::split_node(tree, tree.root(), points, refs);
    return tree;
}

/// The unique leaf whose cell contains (x, y). Cells are closed on their min
/// edges and open on their max edges, except along the root's max edges.
inline NodeId locate_leaf(const QuadTree& tree, double x, double y) {
    if (!tree.root_region.contains(x, y))
        throw std::out_of_range("point lies outside the quadtree region");
    NodeId id = tree.root();
    while (!tree.nodes[id].is_leaf())
        id = tree.nodes[id].first_child + quadrant_of(tree.nodes[id].region, x, y);
    return id;
}

inline NodeId locate_leaf(const QuadTree& tree, const TrajPoint& p) {
    return locate_leaf(tree, p.x, p.y);
}

/// Leaves in z-curve order (the b1, b2, ... numbering of the blocks).
inline std::vector<NodeId> leaves_in_z_order(const QuadTree& tree) {
    std::vector<NodeId> out;
    if (tree.nodes.empty())
        return out;
    std::vector<NodeId> stack{tree.root()};
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        if (tree.nodes[id].is_leaf()) {
            out.push_back(id);
            continue;
        }
        for (int q = 3; q >= 0; --q)
            stack.push_back(tree.nodes[id].first_child + static_cast<NodeId>(q));
    }
    return out;
}

struct TemporalBucketing {
    Seconds epoch = 0;
    Seconds width = kDefaultBucketWidth;

    friend bool operator==(const TemporalBucketing&, const TemporalBucketing&) = default;
};

/// Floor division for a positive divisor.
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && (a < 0))
        --q;
    return q;
}

inline std::uint64_t bucket_of(const TemporalBucketing& b, Seconds t) {
    if (b.width <= 0)
        throw std::invalid_argument("bucket width must be positive");
    if (t < b.epoch)
        throw std::out_of_range("timestamp precedes the bucketing epoch");
    return static_cast<std::uint64_t>((t - b.epoch) / b.width);
}

struct SpaceTimeKey {
    SpatialId spatial_id;
    std::uint64_t temporal_id = 0;

    friend auto operator<=>(const SpaceTimeKey&, const SpaceTimeKey&) = default;
};

/// Maps every sample to its (leaf spatial-id, bucket) pair. Returns a sorted
/// set without duplicates.
inline std::vector<SpaceTimeKey> transform(const QuadTree& tree, const TemporalBucketing& b,
                                           const Trajectory& traj) {
    std::vector<SpaceTimeKey> keys;
    keys.reserve(traj.points.size());
    for (const auto& p : traj.points)
        keys.push_back({tree.nodes[locate_leaf(tree, p)].spatial_id(), bucket_of(b, p.t)});
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

} // namespace ctq

#endif // CTQ_SPACETIME_HPP
