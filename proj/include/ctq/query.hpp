#ifndef CTQ_QUERY_HPP
#define CTQ_QUERY_HPP

#include "ctq/qr_index.hpp"
#include "ctq/tracing.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

/// \file
/// Divide-and-conquer contact matching over QR-trees (matchCT) and the
/// multi-level tracing entry points for QR and Q2R indexes.

namespace ctq {

/// The part of a frontier trajectory that is relevant to one quadtree node.
struct QuerySlice {
    std::vector<TrajPoint> points;
    double psi = 0;
    Seconds tau = 0;
    std::optional<Seconds> t_min;
};

/// Splits `slice` over the four children of `parent`: a point goes to every
/// child whose region meets its psi-square.
inline std::array<QuerySlice, 4> extended_intersection(const QuadTree& tree, NodeId parent, const QuerySlice& slice) {
    std::array<QuerySlice, 4> out;
    const auto kids = tree.children(parent);
    for (unsigned c = 0; c < 4; ++c) {
        out[c].psi = slice.psi;
        out[c].tau = slice.tau;
        out[c].t_min = slice.t_min;
        const Region& r = tree.nodes[kids[c]].region;
        for (const auto& p : slice.points)
            if (embr(p, slice.psi).intersects(r))
                out[c].points.push_back(p);
    }
    return out;
}

/// Sorted bucket indices overlapping [t - tau, t + tau] for any slice point.
inline std::vector<std::uint64_t> extended_time_windows(const QuerySlice& slice, const TemporalBucketing& b) {
    std::vector<std::uint64_t> out;
    for (const auto& p : slice.points) {
        const std::int64_t hi = floor_div(p.t + slice.tau - b.epoch, b.width);
        if (hi < 0)
            continue;
        const std::int64_t lo = std::max<std::int64_t>(0, floor_div(p.t - slice.tau - b.epoch, b.width));
        for (std::int64_t k = lo; k <= hi; ++k)
            out.push_back(static_cast<std::uint64_t>(k));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Fetches the pages registered at `leaf` for any of `buckets` and tests
/// their trajectories against the whole frontier trajectory.
inline ContactSet evaluate_contacts(const QRIndex& index, NodeId leaf, const std::vector<std::uint64_t>& buckets,
                                    const QuerySlice& /*slice*/, MatchContext& ctx) {
    ContactSet out;
    if (buckets.empty())
        return out;
    for (const auto& e : index.registry.at(leaf)) {
        auto it = std::lower_bound(buckets.begin(), buckets.end(), e.bucket_min);
        if (it == buckets.end() || *it > e.bucket_max)
            continue;
        merge_contacts(out, evaluate_page(*index.pages, e.page_id, ctx));
    }
    return out;
}

inline ContactSet match_ct(const QRIndex& index, NodeId node, const QuerySlice& slice, MatchContext& ctx) {
    ContactSet out;
    if (slice.points.empty())
        return out;
    ++ctx.stats.nodes_visited;
    const auto& n = index.tree.nodes[node];
    if (n.is_leaf())
        return evaluate_contacts(index, node, extended_time_windows(slice, index.bucketing), slice, ctx);

    const auto parts = extended_intersection(index.tree, node, slice);
    for (unsigned c = 0; c < 4; ++c)
        merge_contacts(out, match_ct(index, n.first_child + c, parts[c], ctx));
    return out;
}

/// Root slice of the frontier trajectory: the points whose psi-square meets
/// the index's root region.
inline QuerySlice root_slice(const QRIndex& index, const MatchContext& ctx) {
    QuerySlice s{{}, ctx.psi, ctx.tau, ctx.t_min};
    for (const auto& p : ctx.frontier.points)
        if (embr(p, ctx.psi).intersects(index.tree.root_region))
            s.points.push_back(p);
    return s;
}

inline TraceResult trace(const QRIndex& index, const Trajectory& q, const QueryParams& params) {
    return run_trace(q, params, [&](MatchContext& ctx) {
        return match_ct(index, index.tree.root(), root_slice(index, ctx), ctx);
    });
}

inline TraceResult trace(const Q2RIndex& index, const Trajectory& q, const QueryParams& params) {
    return run_trace(q, params, [&](MatchContext& ctx) {
        ContactSet out;
        for (const QRIndex* qr : route_q2r(index, ctx.frontier, ctx.psi)) {
            ++ctx.stats.nodes_visited;
            merge_contacts(out, match_ct(*qr, qr->tree.root(), root_slice(*qr, ctx), ctx));
        }
        return out;
    });
}

} // namespace ctq

#endif // CTQ_QUERY_HPP
