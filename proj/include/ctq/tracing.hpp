#ifndef CTQ_TRACING_HPP
#define CTQ_TRACING_HPP

#include "ctq/model.hpp"
#include "ctq/storage.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <unordered_set>
#include <vector>

/// \file
/// Level-order tracing driver shared by the index-backed engines, plus the
/// exact candidate test applied to fetched pages.

namespace ctq {

struct TraceStats {
    std::uint64_t unique_page_reads = 0;
    std::uint64_t raw_page_reads = 0;
    std::uint64_t nodes_visited = 0;
    std::uint64_t candidates_tested = 0;
    double wall_seconds = 0;
};

struct TraceResult {
    ExposureSet records;
    TraceStats stats;
};

/// A candidate exposure found while evaluating one frontier member.
struct Contact {
    Seconds t_exposed = 0;
    UserId via = 0;
    std::shared_ptr<const Trajectory> trajectory;
};

using ContactSet = std::map<UserId, Contact>;

/// Inserts `c`, keeping the earliest exposure (ties: smaller via).
inline void merge_contact(ContactSet& into, UserId user, const Contact& c) {
    auto [it, inserted] = into.try_emplace(user, c);
    if (!inserted && better_exposure(c.t_exposed, c.via, it->second.t_exposed, it->second.via))
        it->second = c;
}

inline void merge_contacts(ContactSet& into, const ContactSet& from) {
    for (const auto& [user, c] : from)
        merge_contact(into, user, c);
}

/// State for evaluating one frontier member against an index.
struct MatchContext {
    const Trajectory& frontier;
    std::optional<Seconds> t_min;
    double psi;
    Seconds tau;
    const std::unordered_set<UserId>& excluded;
    QueryScope& scope;
    TraceStats& stats;
    std::unordered_set<PageId> evaluated_pages; ///< pages already tested for this member
};

/// Fetches `page` (once per frontier member) and runs the exact meeting test
/// on each stored trajectory that is not excluded.
inline ContactSet evaluate_page(const PageStore& store, PageId page, MatchContext& ctx) {
    ContactSet out;
    if (!ctx.evaluated_pages.insert(page).second)
        return out;
    auto trajs = store.read_page(page, ctx.scope);
    for (auto& u : trajs) {
        if (u.user == ctx.frontier.user || ctx.excluded.count(u.user))
            continue;
        ++ctx.stats.candidates_tested;
        if (auto t = meets(u, ctx.frontier, ctx.psi, ctx.tau, ctx.t_min)) {
            const UserId user = u.user;
            merge_contact(out, user, Contact{*t, ctx.frontier.user, std::make_shared<const Trajectory>(std::move(u))});
        }
    }
    return out;
}

/// Runs the level-by-level expansion: `engine(ctx)` returns the contacts of
/// one frontier member. Users recorded at an earlier level are never revisited.
template <class Engine>
TraceResult run_trace(const Trajectory& q, const QueryParams& params, Engine&& engine) {
    validate(params);
    const auto start = std::chrono::steady_clock::now();

    TraceResult result;
    QueryScope scope;
    std::unordered_set<UserId> excluded{q.user};
    std::map<UserId, ExposureRecord> recorded;

    struct Member {
        std::shared_ptr<const Trajectory> traj;
        std::optional<Seconds> t_min;
    };
    std::vector<Member> frontier{{std::shared_ptr<const Trajectory>(&q, [](const Trajectory*) {}), std::nullopt}};

    for (std::uint32_t level = 0; level < params.levels && !frontier.empty(); ++level) {
        ContactSet found;
        for (const auto& v : frontier) {
            MatchContext ctx{*v.traj, v.t_min, params.psi, params.tau, excluded, scope, result.stats, {}};
            merge_contacts(found, engine(ctx));
        }
        std::vector<Member> next;
        next.reserve(found.size());
        for (const auto& [user, c] : found) {
            recorded.emplace(user, ExposureRecord{user, level, c.t_exposed, c.via});
            next.push_back({c.trajectory, c.t_exposed});
        }
        for (const auto& [user, c] : found)
            excluded.insert(user);
        frontier = std::move(next);
    }

    for (const auto& [user, rec] : recorded)
        result.records.push_back(rec);
    result.stats.unique_page_reads = scope.counter().unique_reads_this_query;
    result.stats.raw_page_reads = scope.counter().raw_reads;
    result.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

} // namespace ctq

#endif // CTQ_TRACING_HPP
