#ifndef CTQ_BASELINE3D_HPP
#define CTQ_BASELINE3D_HPP

#include "ctq/qr_index.hpp"
#include "ctq/storage.hpp"
#include "ctq/tracing.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <tuple>
#include <vector>

/// \file
/// Baseline index: a bulk-loaded 3D R-tree over (x, y, t) where every whole
/// trajectory is one leaf entry. Internal nodes stay in memory; only leaf
/// pages count as I/O.

namespace ctq {

struct Box3 {
    double min_x = 0, max_x = 0;
    double min_y = 0, max_y = 0;
    Seconds min_t = 0, max_t = 0;

    friend bool operator==(const Box3&, const Box3&) = default;

    bool intersects(const Box3& o) const {
        return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y && min_t <= o.max_t
               && o.min_t <= max_t;
    }

    bool contains(const Box3& o) const {
        return min_x <= o.min_x && o.max_x <= max_x && min_y <= o.min_y && o.max_y <= max_y && min_t <= o.min_t
               && o.max_t <= max_t;
    }

    void expand(const Box3& o) {
        min_x = std::min(min_x, o.min_x);
        max_x = std::max(max_x, o.max_x);
        min_y = std::min(min_y, o.min_y);
        max_y = std::max(max_y, o.max_y);
        min_t = std::min(min_t, o.min_t);
        max_t = std::max(max_t, o.max_t);
    }

    double cx() const { return min_x / 2 + max_x / 2; }
    double cy() const { return min_y / 2 + max_y / 2; }
    double ct() const { return static_cast<double>(min_t) / 2 + static_cast<double>(max_t) / 2; }
};

inline Box3 box_of(const Trajectory& t) {
    const auto& f = t.points.front();
    Box3 b{f.x, f.x, f.y, f.y, f.t, f.t};
    for (const auto& p : t.points)
        b.expand(Box3{p.x, p.x, p.y, p.y, p.t, p.t});
    return b;
}

struct RNode3 {
    Box3 box;
    bool leaf = true;
    std::vector<std::uint32_t> children; ///< node ids for internal nodes
    PageId page = 0;                     ///< leaf page
    std::vector<UserId> members;         ///< leaf entries, in page order

    friend bool operator==(const RNode3&, const RNode3&) = default;
};

struct RTree3 {
    std::vector<RNode3> nodes;
    std::uint32_t root = 0;
    std::uint32_t page_capacity = 4;
    std::uint32_t fanout = 16;
    std::shared_ptr<PageStore> pages;

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const RNode3& n) { return n.leaf; }));
    }
};

/// 3D Sort-Tile-Recursive grouping of boxes into runs of at most `capacity`.
/// `ids` breaks ties so the grouping is deterministic.
inline std::vector<std::vector<std::size_t>> str_pack3(const std::vector<Box3>& boxes,
                                                       const std::vector<std::uint64_t>& ids, std::size_t capacity) {
    const std::size_t n = boxes.size();
    std::vector<std::vector<std::size_t>> groups;
    if (n == 0)
        return groups;
    const std::size_t page_total = (n + capacity - 1) / capacity;
    std::size_t slices = 1;
    while (slices * slices * slices < page_total)
        ++slices;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    auto by = [&](auto key) {
        return [&, key](std::size_t a, std::size_t b) { return std::make_tuple(key(a), ids[a]) < std::make_tuple(key(b), ids[b]); };
    };
    auto kx = [&](std::size_t i) { return boxes[i].cx(); };
    auto ky = [&](std::size_t i) { return boxes[i].cy(); };
    auto kt = [&](std::size_t i) { return boxes[i].ct(); };

    const std::size_t x_slab = capacity * slices * ((page_total + slices * slices - 1) / (slices * slices));
    std::sort(order.begin(), order.end(), by(kx));
    for (std::size_t xb = 0; xb < n; xb += x_slab) {
        const std::size_t xe = std::min(n, xb + x_slab);
        std::sort(order.begin() + xb, order.begin() + xe, by(ky));
        const std::size_t y_slab = capacity * ((((xe - xb) + capacity - 1) / capacity + slices - 1) / slices);
        for (std::size_t yb = xb; yb < xe; yb += y_slab) {
            const std::size_t ye = std::min(xe, yb + y_slab);
            std::sort(order.begin() + yb, order.begin() + ye, by(kt));
            for (std::size_t g = yb; g < ye; g += capacity)
                groups.emplace_back(order.begin() + g, order.begin() + std::min(ye, g + capacity));
        }
    }
    return groups;
}

/// Bulk-loads the baseline R-tree. Leaves hold at most `page_capacity`
/// trajectories and are written to pages; internal nodes have at most
/// `fanout` children.
inline RTree3 build_baseline(const Dataset& d, std::uint32_t page_capacity = 4, std::uint32_t fanout = 16) {
    if (page_capacity < 1)
        throw std::invalid_argument("page capacity must be at least 1");
    if (fanout < 2)
        throw std::invalid_argument("fanout must be at least 2");
    validate(d);

    RTree3 tree;
    tree.page_capacity = page_capacity;
    tree.fanout = fanout;
    tree.pages = std::make_shared<PageStore>();

    std::vector<Box3> boxes;
    std::vector<std::uint64_t> ids;
    for (const auto& t : d.trajectories) {
        boxes.push_back(box_of(t));
        ids.push_back(t.user);
    }

    std::vector<std::uint32_t> level;
    std::vector<Trajectory> members;
    for (const auto& group : str_pack3(boxes, ids, page_capacity)) {
        RNode3 leaf;
        leaf.box = boxes[group.front()];
        members.clear();
        for (auto i : group) {
            leaf.box.expand(boxes[i]);
            leaf.members.push_back(d.trajectories[i].user);
            members.push_back(d.trajectories[i]);
        }
        leaf.page = tree.pages->write_page(members);
        level.push_back(static_cast<std::uint32_t>(tree.nodes.size()));
        tree.nodes.push_back(std::move(leaf));
    }

    while (level.size() > 1) {
        std::vector<Box3> lboxes;
        std::vector<std::uint64_t> lids;
        for (auto id : level) {
            lboxes.push_back(tree.nodes[id].box);
            lids.push_back(id);
        }
        std::vector<std::uint32_t> next;
        for (const auto& group : str_pack3(lboxes, lids, fanout)) {
            RNode3 node;
            node.leaf = false;
            node.box = lboxes[group.front()];
            for (auto i : group) {
                node.box.expand(lboxes[i]);
                node.children.push_back(level[i]);
            }
            next.push_back(static_cast<std::uint32_t>(tree.nodes.size()));
            tree.nodes.push_back(std::move(node));
        }
        level = std::move(next);
    }
    tree.root = level.empty() ? 0 : level.front();
    tree.pages->seal();
    return tree;
}

/// Query boxes of a frontier trajectory: psi-squares by [t - tau, t + tau].
inline std::vector<Box3> query_boxes(const Trajectory& v, double psi, Seconds tau) {
    std::vector<Box3> out;
    out.reserve(v.points.size());
    for (const auto& p : v.points) {
        const Region r = embr(p, psi);
        out.push_back(Box3{r.min_x, r.max_x, r.min_y, r.max_y, p.t - tau, p.t + tau});
    }
    return out;
}

inline TraceResult query_baseline(const RTree3& tree, const Trajectory& q, const QueryParams& params) {
    return run_trace(q, params, [&](MatchContext& ctx) {
        ContactSet out;
        if (tree.nodes.empty())
            return out;
        const auto boxes = query_boxes(ctx.frontier, ctx.psi, ctx.tau);
        std::vector<std::uint32_t> stack{tree.root};
        while (!stack.empty()) {
            const auto& node = tree.nodes[stack.back()];
            stack.pop_back();
            ++ctx.stats.nodes_visited;
            const bool hit = std::any_of(boxes.begin(), boxes.end(), [&](const Box3& b) { return b.intersects(node.box); });
            if (!hit)
                continue;
            if (node.leaf) {
                merge_contacts(out, evaluate_page(*tree.pages, node.page, ctx));
            } else {
                for (auto it = node.children.rbegin(); it != node.children.rend(); ++it)
                    stack.push_back(*it);
            }
        }
        return out;
    });
}

} // namespace ctq

#endif // CTQ_BASELINE3D_HPP
