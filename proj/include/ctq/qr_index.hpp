#ifndef CTQ_QR_INDEX_HPP
#define CTQ_QR_INDEX_HPP

#include "ctq/model.hpp"
#include "ctq/spacetime.hpp"
#include "ctq/storage.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <vector>

/// \file
/// QR-tree: a point quadtree whose leaves register disk pages (with bucket
/// ranges); pages group trajectories that are close in the transformed
/// (spatial-id, temporal-id) space. Also the Q2R-tree, which first spreads
/// trajectories over a top-level quadtree by extent.

namespace ctq {

/// Bounding box of a trajectory's keys in the transformed space. The spatial
/// axis uses left-aligned z-order values.
struct TransformedMBR {
    std::uint64_t min_s = 0;
    std::uint64_t max_s = 0;
    std::uint64_t min_t = 0;
    std::uint64_t max_t = 0;
    UserId owner = 0;
};

struct PageAssignment {
    PageId page_id = 0;
    std::vector<UserId> members;

    friend bool operator==(const PageAssignment&, const PageAssignment&) = default;
};

struct RegistryEntry {
    PageId page_id = 0;
    std::uint64_t bucket_min = 0;
    std::uint64_t bucket_max = 0;

    friend bool operator==(const RegistryEntry&, const RegistryEntry&) = default;
};

struct QrParams {
    std::uint32_t theta = 128;
    std::uint32_t page_capacity = 4;
    Seconds bucket_width = kDefaultBucketWidth;
    std::uint32_t max_depth = kDefaultMaxDepth;

    friend bool operator==(const QrParams&, const QrParams&) = default;
};

struct QRIndex {
    QuadTree tree;
    TemporalBucketing bucketing;
    std::vector<std::vector<RegistryEntry>> registry; ///< per node id, sorted by page id; empty for internal nodes
    std::vector<PageAssignment> assignments;          ///< pages written by this index
    std::shared_ptr<PageStore> pages;
    QrParams params;
};

inline void validate(const QrParams& p) {
    if (p.theta < 1)
        throw std::invalid_argument("theta must be at least 1");
    if (p.page_capacity < 1)
        throw std::invalid_argument("page capacity must be at least 1");
    if (p.bucket_width <= 0)
        throw std::invalid_argument("bucket width must be positive");
    if (p.max_depth < 1 || p.max_depth > kMaxSupportedDepth)
        throw std::invalid_argument("max depth must be in [1, 31]");
}

/// Smallest s with s * s >= n.
inline std::size_t ceil_sqrt(std::size_t n) {
    std::size_t s = 0;
    while (s * s < n)
        ++s;
    return s;
}

/// Sort-Tile-Recursive packing of transformed MBRs into pages of at most
/// `page_capacity` trajectories. Only the leaf level is produced; page ids are
/// the ordinal of each group.
inline std::vector<PageAssignment> group_trajectories(std::span<const TransformedMBR> mbrs,
                                                      std::uint32_t page_capacity) {
    if (page_capacity < 1)
        throw std::invalid_argument("page capacity must be at least 1");
    std::vector<PageAssignment> out;
    const std::size_t n = mbrs.size();
    if (n == 0)
        return out;

    const std::size_t cap = page_capacity;
    const std::size_t page_total = (n + cap - 1) / cap;
    const std::size_t slices = ceil_sqrt(page_total);
    const std::size_t slab = cap * ((page_total + slices - 1) / slices);

    auto mid_s = [&](std::size_t i) { return mbrs[i].min_s + (mbrs[i].max_s - mbrs[i].min_s) / 2; };
    auto mid_t = [&](std::size_t i) { return mbrs[i].min_t + (mbrs[i].max_t - mbrs[i].min_t) / 2; };

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::make_tuple(mid_s(a), mid_t(a), mbrs[a].owner) < std::make_tuple(mid_s(b), mid_t(b), mbrs[b].owner);
    });

    for (std::size_t begin = 0; begin < n; begin += slab) {
        const std::size_t end = std::min(n, begin + slab);
        std::sort(order.begin() + begin, order.begin() + end, [&](std::size_t a, std::size_t b) {
            return std::make_tuple(mid_t(a), mid_s(a), mbrs[a].owner)
                   < std::make_tuple(mid_t(b), mid_s(b), mbrs[b].owner);
        });
        for (std::size_t g = begin; g < end; g += cap) {
            PageAssignment page;
            page.page_id = out.size();
            for (std::size_t k = g; k < std::min(end, g + cap); ++k)
                page.members.push_back(mbrs[order[k]].owner);
            out.push_back(std::move(page));
        }
    }
    return out;
}

namespace detail {

/// Copies of the points of `trajs`, in order.
inline std::vector<TrajPoint> flatten(std::span<const Trajectory* const> trajs) {
    std::size_t total = 0;
    for (auto* t : trajs)
        total += t->points.size();
    std::vector<TrajPoint> flat;
    flat.reserve(total);
    for (auto* t : trajs)
        flat.insert(flat.end(), t->points.begin(), t->points.end());
    return flat;
}

inline void restrict_node(const QuadTree& global, NodeId gid, QuadTree& out, NodeId id,
                          std::span<const TrajPoint> points, std::span<std::uint32_t> refs) {
    out.nodes[id].point_count = refs.size();
    const QuadNode& g = global.nodes[gid];
    if (g.is_leaf() || refs.empty())
        return;
    std::array<std::vector<std::uint32_t>, 4> parts;
    for (auto r : refs)
        parts[quadrant_of(g.region, points[r].x, points[r].y)].push_back(r);
    const auto first = static_cast<NodeId>(out.nodes.size());
    out.nodes[id].first_child = first;
    for (unsigned q = 0; q < 4; ++q) {
        QuadNode child = global.nodes[g.first_child + q];
        child.first_child = kNoNode;
        child.point_count = 0;
        out.nodes.push_back(child);
    }
    std::array<std::size_t, 5> offsets{};
    for (unsigned q = 0; q < 4; ++q) {
        std::copy(parts[q].begin(), parts[q].end(), refs.begin() + offsets[q]);
        offsets[q + 1] = offsets[q] + parts[q].size();
        parts[q] = {};
    }
    for (unsigned q = 0; q < 4; ++q)
        restrict_node(global, g.first_child + q, out, first + q, points,
                      refs.subspan(offsets[q], offsets[q + 1] - offsets[q]));
}

/// The partition of `global` restricted to `points`: a block is split exactly
/// when `global` splits it and it holds at least one of `points`. Leaves keep
/// the cells, depths and spatial-ids of the global tree.
inline QuadTree restrict_quadtree(const QuadTree& global, std::span<const TrajPoint> points) {
    QuadTree out;
    out.root_region = global.root_region;
    out.capacity = global.capacity;
    out.max_depth = global.max_depth;
    out.nodes.push_back(global.nodes[global.root()]);
    out.nodes[0].first_child = kNoNode;
    std::vector<std::uint32_t> refs(points.size());
    for (std::uint32_t i = 0; i < refs.size(); ++i) {
        if (!global.root_region.contains(points[i].x, points[i].y))
            throw std::out_of_range("point lies outside the quadtree region");
        refs[i] = i;
    }
    restrict_node(global, global.root(), out, out.root(), points, refs);
    return out;
}

/// QR-tree construction over a subset of trajectories on a given point
/// quadtree, writing pages into a shared store.
inline QRIndex build_qr_over(std::span<const Trajectory* const> trajs, const QrParams& params, QuadTree tree,
                             const TemporalBucketing& bucketing, std::shared_ptr<PageStore> store) {
    QRIndex index;
    index.params = params;
    index.bucketing = bucketing;
    index.pages = store;
    index.tree = std::move(tree);

    // (leaf, bucket) keys per trajectory, deduplicated.
    std::vector<std::vector<std::pair<NodeId, std::uint64_t>>> keys(trajs.size());
    std::vector<TransformedMBR> mbrs(trajs.size());
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        auto& k = keys[i];
        k.reserve(trajs[i]->points.size());
        for (const auto& p : trajs[i]->points)
            k.emplace_back(locate_leaf(index.tree, p), bucket_of(bucketing, p.t));
        std::sort(k.begin(), k.end());
        k.erase(std::unique(k.begin(), k.end()), k.end());

        auto& m = mbrs[i];
        m.owner = trajs[i]->user;
        m.min_s = m.min_t = std::numeric_limits<std::uint64_t>::max();
        m.max_s = m.max_t = 0;
        for (const auto& [leaf, bucket] : k) {
            const auto s = index.tree.nodes[leaf].spatial_id().aligned(params.max_depth);
            m.min_s = std::min(m.min_s, s);
            m.max_s = std::max(m.max_s, s);
            m.min_t = std::min(m.min_t, bucket);
            m.max_t = std::max(m.max_t, bucket);
        }
    }

    std::unordered_map<UserId, std::size_t> slot;
    slot.reserve(trajs.size());
    for (std::size_t i = 0; i < trajs.size(); ++i)
        slot.emplace(trajs[i]->user, i);

    auto groups = group_trajectories(mbrs, params.page_capacity);
    std::vector<PageId> page_of(trajs.size());
    std::vector<Trajectory> members;
    for (auto& g : groups) {
        members.clear();
        for (auto user : g.members)
            members.push_back(*trajs[slot.at(user)]);
        g.page_id = store->write_page(members);
        for (auto user : g.members)
            page_of[slot.at(user)] = g.page_id;
    }
    index.assignments = std::move(groups);

    // Registry: per (leaf, page), the bucket range of the page's points in that leaf.
    std::vector<std::tuple<NodeId, PageId, std::uint64_t>> hits;
    for (std::size_t i = 0; i < trajs.size(); ++i)
        for (const auto& [leaf, bucket] : keys[i])
            hits.emplace_back(leaf, page_of[i], bucket);
    keys = {};
    std::sort(hits.begin(), hits.end());

    index.registry.assign(index.tree.nodes.size(), {});
    for (std::size_t i = 0; i < hits.size();) {
        const auto [leaf, page, lo] = hits[i];
        std::size_t j = i;
        while (j + 1 < hits.size() && std::get<0>(hits[j + 1]) == leaf && std::get<1>(hits[j + 1]) == page)
            ++j;
        index.registry[leaf].push_back({page, lo, std::get<2>(hits[j])});
        i = j + 1;
    }
    return index;
}

inline TemporalBucketing bucketing_for(std::span<const Trajectory> trajs, Seconds width) {
    Seconds epoch = std::numeric_limits<Seconds>::max();
    for (const auto& t : trajs)
        if (!t.points.empty())
            epoch = std::min(epoch, t.points.front().t);
    if (epoch == std::numeric_limits<Seconds>::max())
        epoch = 0;
    return {epoch, width};
}

} // namespace detail

/// Builds a QR-tree over `d`. An empty dataset yields a single empty leaf over
/// the unit square.
inline QRIndex build_qr(const Dataset& d, const QrParams& params = {}) {
    validate(params);
    validate(d);
    std::vector<const Trajectory*> trajs;
    trajs.reserve(d.trajectories.size());
    for (const auto& t : d.trajectories)
        trajs.push_back(&t);
    auto store = std::make_shared<PageStore>();
    QuadTree tree = build_quadtree(detail::flatten(trajs), params.theta, params.max_depth,
                                   bounding_region(d.trajectories));
    auto index = detail::build_qr_over(trajs, params, std::move(tree),
                                       detail::bucketing_for(d.trajectories, params.bucket_width), store);
    store->seal();
    return index;
}

/// Pages registered at `leaf` whose bucket range contains `bucket`.
inline std::vector<PageId> leaf_lookup(const QRIndex& index, NodeId leaf, std::uint64_t bucket) {
    std::vector<PageId> out;
    if (leaf >= index.registry.size())
        throw std::out_of_range("node does not belong to this index");
    for (const auto& e : index.registry[leaf])
        if (e.bucket_min <= bucket && bucket <= e.bucket_max)
            out.push_back(e.page_id);
    return out;
}

inline std::size_t page_count(const QRIndex& index) { return index.assignments.size(); }

// --- Q2R-tree -------------------------------------------------------------

struct Q2rParams {
    QrParams qr;
    std::uint32_t theta_traj = 64;

    friend bool operator==(const Q2rParams&, const Q2rParams&) = default;
};

struct SpatialBox {
    double min_x, min_y, max_x, max_y;
};

inline SpatialBox spatial_box(const Trajectory& t) {
    SpatialBox b{t.points.front().x, t.points.front().y, t.points.front().x, t.points.front().y};
    for (const auto& p : t.points) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

/// Whether `block` fully contains `box` under the half-open cell rule (max
/// edges are open unless they lie on the root's max edge).
inline bool block_contains(const Region& block, const Region& root, const SpatialBox& box) {
    auto upper_ok = [](double v, double block_max, double root_max) {
        return v < block_max || (block_max == root_max && v <= block_max);
    };
    return box.min_x >= block.min_x && box.min_y >= block.min_y && upper_ok(box.max_x, block.max_x, root.max_x)
           && upper_ok(box.max_y, block.max_y, root.max_y);
}

struct Q2RNode {
    Region block;
    std::uint32_t depth = 0;
    NodeId first_child = kNoNode;
    std::vector<UserId> owned; ///< sorted
    std::optional<QRIndex> qr; ///< present iff `owned` is non-empty

    bool is_leaf() const { return first_child == kNoNode; }
};

struct Q2RIndex {
    Region root_region;
    TemporalBucketing bucketing;
    std::vector<Q2RNode> nodes; ///< node 0 is the root; children contiguous in z-order
    std::shared_ptr<PageStore> pages;
    Q2rParams params;
};

namespace detail {

inline void split_q2r(Q2RIndex& index, NodeId id, std::vector<std::uint32_t> members,
                      std::span<const Trajectory> trajs, std::span<const SpatialBox> boxes) {
    const Region block = index.nodes[id].block;
    std::array<std::vector<std::uint32_t>, 4> pushed;
    std::vector<std::uint32_t> stay;
    for (auto m : members) {
        bool placed = false;
        for (unsigned q = 0; q < 4 && !placed; ++q) {
            if (block_contains(child_region(block, q), index.root_region, boxes[m])) {
                pushed[q].push_back(m);
                placed = true;
            }
        }
        if (!placed)
            stay.push_back(m);
    }
    const std::size_t pushable = members.size() - stay.size();
    if (pushable <= index.params.theta_traj || index.nodes[id].depth >= index.params.qr.max_depth) {
        stay = std::move(members);
        pushed = {};
    }

    auto& owned = index.nodes[id].owned;
    for (auto m : stay)
        owned.push_back(trajs[m].user);
    std::sort(owned.begin(), owned.end());
    if (pushable <= index.params.theta_traj || index.nodes[id].depth >= index.params.qr.max_depth)
        return;

    const auto first = static_cast<NodeId>(index.nodes.size());
    const std::uint32_t depth = index.nodes[id].depth + 1;
    index.nodes[id].first_child = first;
    for (unsigned q = 0; q < 4; ++q) {
        auto& child = index.nodes.emplace_back();
        child.block = child_region(block, q);
        child.depth = depth;
    }
    for (unsigned q = 0; q < 4; ++q)
        split_q2r(index, first + q, std::move(pushed[q]), trajs, boxes);
}

} // namespace detail

/// Builds a Q2R-tree: each trajectory settles at the smallest top-level block
/// that fully contains its spatial extent, and every owning block organizes
/// its trajectories as a QR-tree. A block splits while more than `theta_traj`
/// of its trajectories would move into a child. All per-block QR-trees follow
/// one point quadtree over the whole dataset, restricted to their own points,
/// so a location maps to the same leaf cell in every block.
inline Q2RIndex build_q2r(const Dataset& d, const Q2rParams& params = {}) {
    validate(params.qr);
    validate(d);
    Q2RIndex index;
    index.params = params;
    index.root_region = bounding_region(d.trajectories);
    index.bucketing = detail::bucketing_for(d.trajectories, params.qr.bucket_width);
    index.pages = std::make_shared<PageStore>();
    index.nodes.push_back(Q2RNode{index.root_region, 0, kNoNode, {}, std::nullopt});

    std::vector<SpatialBox> boxes;
    boxes.reserve(d.trajectories.size());
    for (const auto& t : d.trajectories)
        boxes.push_back(spatial_box(t));
    std::vector<std::uint32_t> all(d.trajectories.size());
    for (std::uint32_t i = 0; i < all.size(); ++i)
        all[i] = i;
    detail::split_q2r(index, 0, std::move(all), d.trajectories, boxes);

    std::unordered_map<UserId, const Trajectory*> by_user;
    by_user.reserve(d.trajectories.size());
    std::vector<const Trajectory*> all_trajs;
    all_trajs.reserve(d.trajectories.size());
    for (const auto& t : d.trajectories) {
        by_user.emplace(t.user, &t);
        all_trajs.push_back(&t);
    }
    const QuadTree global = build_quadtree(detail::flatten(all_trajs), params.qr.theta, params.qr.max_depth,
                                           index.root_region);

    for (auto& node : index.nodes) {
        if (node.owned.empty())
            continue;
        std::vector<const Trajectory*> subset;
        subset.reserve(node.owned.size());
        for (auto u : node.owned)
            subset.push_back(by_user.at(u));
        node.qr = detail::build_qr_over(subset, params.qr, detail::restrict_quadtree(global, detail::flatten(subset)),
                                        index.bucketing, index.pages);
    }
    index.pages->seal();
    return index;
}

/// Node owning trajectory `user`, or kNoNode.
inline NodeId owner_node(const Q2RIndex& index, UserId user) {
    for (NodeId id = 0; id < index.nodes.size(); ++id)
        if (std::binary_search(index.nodes[id].owned.begin(), index.nodes[id].owned.end(), user))
            return id;
    return kNoNode;
}

/// Square of half-width `psi` around a point, widened by a few ulps so that
/// pruning stays sound under floating-point rounding of the distance test.
inline Region embr(const TrajPoint& p, double psi) {
    const double half = psi + 1e-9 * (1.0 + std::abs(p.x) + std::abs(p.y) + psi);
    return Region{p.x - half, p.y - half, p.x + half, p.y + half};
}

/// QR-trees of the Q2R nodes whose block meets the psi-square of some query
/// point. Ancestors are visited before descendants.
inline std::vector<const QRIndex*> route_q2r(const Q2RIndex& index, const Trajectory& q, double psi) {
    std::vector<const QRIndex*> out;
    if (index.nodes.empty())
        return out;
    std::vector<Region> squares;
    squares.reserve(q.points.size());
    for (const auto& p : q.points)
        squares.push_back(embr(p, psi));

    std::vector<NodeId> stack{0};
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        const auto& node = index.nodes[id];
        const bool hit = std::any_of(squares.begin(), squares.end(),
                                     [&](const Region& s) { return s.intersects(node.block); });
        if (!hit)
            continue;
        if (node.qr)
            out.push_back(&*node.qr);
        if (!node.is_leaf())
            for (int c = 3; c >= 0; --c)
                stack.push_back(node.first_child + static_cast<NodeId>(c));
    }
    return out;
}

} // namespace ctq

#endif // CTQ_QR_INDEX_HPP
