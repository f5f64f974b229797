#ifndef CTQ_CHECKS_HPP
#define CTQ_CHECKS_HPP

#include "ctq/baseline3d.hpp"
#include "ctq/qr_index.hpp"

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

/// \file
/// Full-scan invariant checkers for built indexes. Each returns the list of
/// violations found; an empty list means the structure is sound.

namespace ctq {

using Violations = std::vector<std::string>;

/// Partition and capacity invariants of a quadtree built over `trajs`.
template <class TrajRange>
Violations check_quadtree(const QuadTree& tree, const TrajRange& trajs) {
    Violations out;
    std::vector<std::uint64_t> counted(tree.nodes.size(), 0);
    for (const auto& item : trajs) {
        for (const auto& p : detail::deref(item).points) {
            NodeId leaf = kNoNode;
            try {
                leaf = locate_leaf(tree, p);
            } catch (const std::out_of_range&) {
                out.push_back("point outside root region");
                continue;
            }
            const Region& r = tree.nodes[leaf].region;
            if (!r.contains(p.x, p.y))
                out.push_back("leaf " + std::to_string(leaf) + " does not contain its point");
            ++counted[leaf];
        }
    }
    for (NodeId id = 0; id < tree.nodes.size(); ++id) {
        const auto& n = tree.nodes[id];
        if (n.is_leaf()) {
            if (counted[id] != n.point_count)
                out.push_back("leaf " + std::to_string(id) + " point count mismatch");
            if (n.point_count > tree.capacity && n.depth < tree.max_depth)
                out.push_back("leaf " + std::to_string(id) + " exceeds capacity above max depth");
            continue;
        }
        std::uint64_t sum = 0;
        double area = 0;
        for (unsigned q = 0; q < 4; ++q) {
            const auto& c = tree.nodes[n.first_child + q];
            if (!(c.region == child_region(n.region, q)))
                out.push_back("child " + std::to_string(n.first_child + q) + " does not tile its parent");
            if (c.depth != n.depth + 1 || c.cx != n.cx * 2 + (q & 1u) || c.cy != n.cy * 2 + (q >> 1))
                out.push_back("child " + std::to_string(n.first_child + q) + " has inconsistent cell numbering");
            sum += c.point_count;
            area += (c.region.max_x - c.region.min_x) * (c.region.max_y - c.region.min_y);
        }
        if (sum != n.point_count)
            out.push_back("node " + std::to_string(id) + " point count differs from its children");
        const double parent_area = (n.region.max_x - n.region.min_x) * (n.region.max_y - n.region.min_y);
        if (std::abs(area - parent_area) > 1e-9 * parent_area)
            out.push_back("children of node " + std::to_string(id) + " do not cover it");
    }
    return out;
}

namespace detail {

/// Pages hold whole trajectories identical to the source, each user in
/// exactly one page, at most `capacity` per page.
template <class TrajRange>
void check_pages(const PageStore& store, const std::vector<PageAssignment>& assignments, const TrajRange& trajs,
                 std::uint32_t capacity, std::unordered_map<UserId, PageId>& page_of, Violations& out) {
    std::unordered_map<UserId, const Trajectory*> source;
    for (const auto& item : trajs)
        source.emplace(detail::deref(item).user, &detail::deref(item));
    for (const auto& a : assignments) {
        if (a.members.size() > capacity)
            out.push_back("page " + std::to_string(a.page_id) + " exceeds capacity");
        const auto stored = store.peek_page(a.page_id);
        if (stored.size() != a.members.size())
            out.push_back("page " + std::to_string(a.page_id) + " member count mismatch");
        for (std::size_t i = 0; i < stored.size() && i < a.members.size(); ++i) {
            if (stored[i].user != a.members[i])
                out.push_back("page " + std::to_string(a.page_id) + " member order mismatch");
            auto it = source.find(stored[i].user);
            if (it == source.end() || !(*it->second == stored[i]))
                out.push_back("page " + std::to_string(a.page_id) + " holds a fragment or foreign trajectory");
            if (!page_of.emplace(stored[i].user, a.page_id).second)
                out.push_back("user " + std::to_string(stored[i].user) + " stored in more than one page");
        }
    }
    for (const auto& [user, t] : source)
        if (!page_of.count(user))
            out.push_back("user " + std::to_string(user) + " is not stored in any page");
}

} // namespace detail

/// Quadtree invariants, whole-trajectory pages and registry completeness of a
/// QR-tree built over `trajs`.
template <class TrajRange>
Violations check_qr(const QRIndex& index, const TrajRange& trajs) {
    Violations out = check_quadtree(index.tree, trajs);
    std::unordered_map<UserId, PageId> page_of;
    detail::check_pages(*index.pages, index.assignments, trajs, index.params.page_capacity, page_of, out);

    if (index.registry.size() != index.tree.nodes.size())
        out.push_back("registry size differs from node count");
    for (NodeId id = 0; id < index.registry.size(); ++id) {
        if (!index.tree.nodes[id].is_leaf() && !index.registry[id].empty())
            out.push_back("internal node " + std::to_string(id) + " has registry entries");
        for (const auto& e : index.registry[id])
            if (e.bucket_min > e.bucket_max)
                out.push_back("inverted bucket range at node " + std::to_string(id));
    }
    for (const auto& item : trajs) {
        const Trajectory& t = detail::deref(item);
        auto page = page_of.find(t.user);
        if (page == page_of.end())
            continue;
        for (const auto& p : t.points) {
            const NodeId leaf = locate_leaf(index.tree, p);
            const auto bucket = bucket_of(index.bucketing, p.t);
            const auto& entries = index.registry[leaf];
            const bool covered = std::any_of(entries.begin(), entries.end(), [&](const RegistryEntry& e) {
                return e.page_id == page->second && e.bucket_min <= bucket && bucket <= e.bucket_max;
            });
            if (!covered) {
                out.push_back("registry misses user " + std::to_string(t.user) + " at leaf " + std::to_string(leaf));
                break;
            }
        }
    }
    return out;
}

/// Minimal-containment ownership plus every per-node QR-tree invariant.
inline Violations check_q2r(const Q2RIndex& index, const Dataset& d) {
    Violations out;
    std::map<UserId, NodeId> owner;
    for (NodeId id = 0; id < index.nodes.size(); ++id) {
        for (auto u : index.nodes[id].owned)
            if (!owner.emplace(u, id).second)
                out.push_back("user " + std::to_string(u) + " owned by more than one node");
        if (index.nodes[id].owned.empty() != !index.nodes[id].qr.has_value())
            out.push_back("node " + std::to_string(id) + " QR-tree presence does not match ownership");
    }
    std::unordered_map<UserId, const Trajectory*> by_user;
    for (const auto& t : d.trajectories) {
        by_user.emplace(t.user, &t);
        auto it = owner.find(t.user);
        if (it == owner.end()) {
            out.push_back("user " + std::to_string(t.user) + " has no owner");
            continue;
        }
        const auto box = spatial_box(t);
        const auto& node = index.nodes[it->second];
        if (!block_contains(node.block, index.root_region, box))
            out.push_back("owner of user " + std::to_string(t.user) + " does not contain it");
        if (!node.is_leaf())
            for (unsigned q = 0; q < 4; ++q)
                if (block_contains(index.nodes[node.first_child + q].block, index.root_region, box))
                    out.push_back("a child of the owner of user " + std::to_string(t.user) + " also contains it");
    }
    for (NodeId id = 0; id < index.nodes.size(); ++id) {
        const auto& n = index.nodes[id];
        if (!n.is_leaf())
            for (unsigned q = 0; q < 4; ++q)
                if (!(index.nodes[n.first_child + q].block == child_region(n.block, q)))
                    out.push_back("top-level child does not tile its parent");
        if (!n.qr)
            continue;
        std::vector<const Trajectory*> subset;
        for (auto u : n.owned)
            if (auto it = by_user.find(u); it != by_user.end())
                subset.push_back(it->second);
        for (auto& v : check_qr(*n.qr, subset))
            out.push_back("node " + std::to_string(id) + ": " + v);
    }
    return out;
}

/// Leaf membership, box containment and page atomicity of the baseline tree.
inline Violations check_baseline(const RTree3& tree, const Dataset& d) {
    Violations out;
    std::vector<PageAssignment> assignments;
    for (const auto& n : tree.nodes) {
        if (!n.leaf) {
            for (auto c : n.children)
                if (!n.box.contains(tree.nodes[c].box))
                    out.push_back("internal box does not contain its child");
            continue;
        }
        assignments.push_back({n.page, n.members});
    }
    std::unordered_map<UserId, const Trajectory*> by_user;
    for (const auto& t : d.trajectories)
        by_user.emplace(t.user, &t);
    for (const auto& n : tree.nodes) {
        if (!n.leaf)
            continue;
        for (auto u : n.members)
            if (auto it = by_user.find(u); it != by_user.end() && !n.box.contains(box_of(*it->second)))
                out.push_back("leaf box does not contain member " + std::to_string(u));
    }
    std::unordered_map<UserId, PageId> page_of;
    detail::check_pages(*tree.pages, assignments, d.trajectories, tree.page_capacity, page_of, out);
    return out;
}

} // namespace ctq

#endif // CTQ_CHECKS_HPP
