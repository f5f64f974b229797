#ifndef CTQ_MODEL_HPP
#define CTQ_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_set>
#include <utility>
#include <vector>

/// \file
/// Core domain types for contact tracing queries, the pairwise meeting
/// predicate and the exhaustive reference evaluator.

namespace ctq {

using UserId = std::uint64_t;

/// Seconds since the dataset epoch.
using Seconds = std::int64_t;

struct TrajPoint {
    double x = 0; ///< planar meters
    double y = 0; ///< planar meters
    Seconds t = 0;

    friend bool operator==(const TrajPoint&, const TrajPoint&) = default;
};

inline std::ostream& operator<<(std::ostream& o, const TrajPoint& p) {
    return o << "(" << p.x << ", " << p.y << ", t=" << p.t << ")";
}

/// A user's time-ordered location samples. Equal timestamps are allowed.
struct Trajectory {
    UserId user = 0;
    std::vector<TrajPoint> points;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Dataset {
    std::vector<Trajectory> trajectories;
    std::int64_t window_days = 0; ///< length T of the covered history, metadata only

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct QueryParams {
    double psi = 2.0;    ///< spatial threshold, meters
    Seconds tau = 1800;  ///< temporal threshold
    std::uint32_t levels = 1;
};

/// One member of a contact tracing answer: `user` was exposed at
/// `t_exposed` by `via` after `level` intermediate carriers.
struct ExposureRecord {
    UserId user = 0;
    std::uint32_t level = 0;
    Seconds t_exposed = 0;
    UserId via = 0;

    friend bool operator==(const ExposureRecord&, const ExposureRecord&) = default;
};

inline std::ostream& operator<<(std::ostream& o, const ExposureRecord& r) {
    return o << "{user: " << r.user << ", level: " << r.level << ", t_exposed: " << r.t_exposed
             << ", via: " << r.via << "}";
}

/// Answer set of a contact tracing query, sorted by user id.
using ExposureSet = std::vector<ExposureRecord>;

inline void validate(const TrajPoint& p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw std::invalid_argument("trajectory point has a non-finite coordinate");
    if (p.t < 0)
        throw std::invalid_argument("trajectory point has a negative timestamp");
}

inline void validate(const Trajectory& traj) {
    if (traj.points.empty())
        throw std::invalid_argument("trajectory of user " + std::to_string(traj.user) + " is empty");
    for (std::size_t i = 0; i < traj.points.size(); ++i) {
        validate(traj.points[i]);
        if (i > 0 && traj.points[i].t < traj.points[i - 1].t)
            throw std::invalid_argument("trajectory of user " + std::to_string(traj.user)
                                        + " is not sorted by time");
    }
}

inline void validate(const Dataset& d) {
    std::unordered_set<UserId> seen;
    seen.reserve(d.trajectories.size());
    for (const auto& traj : d.trajectories) {
        validate(traj);
        if (!seen.insert(traj.user).second)
            throw std::invalid_argument("duplicate user id " + std::to_string(traj.user));
    }
}

inline void validate(const QueryParams& p) {
    if (!(p.psi > 0) || !std::isfinite(p.psi))
        throw std::invalid_argument("psi must be a positive finite distance");
    if (p.tau < 0)
        throw std::invalid_argument("tau must be non-negative");
    if (p.levels < 1)
        throw std::invalid_argument("levels must be at least 1");
}

inline double spatial_dist(const TrajPoint& a, const TrajPoint& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

inline Seconds temporal_dist(Seconds t1, Seconds t2) {
    return t1 < t2 ? t2 - t1 : t1 - t2;
}

/// Returns the earliest timestamp of `u` that lies within (psi, tau) of some
/// sample of `v` and, if given, is strictly later than `t_min`.
///
/// Both trajectories must be sorted by time; the search walks `u` in time
/// order and only inspects the samples of `v` inside the tau window.
inline std::optional<Seconds> meets(const Trajectory& u, const Trajectory& v, double psi, Seconds tau,
                                    std::optional<Seconds> t_min = std::nullopt) {
    const auto& up = u.points;
    const auto& vp = v.points;
    if (up.empty() || vp.empty())
        return std::nullopt;
    if (up.back().t + tau < vp.front().t || vp.back().t + tau < up.front().t)
        return std::nullopt;

    auto by_time = [](const TrajPoint& p, Seconds t) { return p.t < t; };
    auto first = up.begin();
    if (t_min)
        first = std::upper_bound(up.begin(), up.end(), *t_min,
                                 [](Seconds t, const TrajPoint& p) { return t < p.t; });

    for (auto it = first; it != up.end(); ++it) {
        auto j = std::lower_bound(vp.begin(), vp.end(), it->t - tau, by_time);
        for (; j != vp.end() && j->t <= it->t + tau; ++j) {
            if (spatial_dist(*it, *j) <= psi)
                return it->t;
        }
    }
    return std::nullopt;
}

/// Orders exposure candidates: earlier exposure wins, ties go to the smaller
/// infecting user id.
inline bool better_exposure(Seconds t, UserId via, Seconds best_t, UserId best_via) {
    return std::tie(t, via) < std::tie(best_t, best_via);
}

/// Exhaustive level-order evaluation of a contact tracing query.
///
/// Every level tests every not-yet-exposed user of `d` against every member
/// of the previous level's frontier. Used as ground truth for the indexes.
inline ExposureSet oracle_ctq(const Dataset& d, const Trajectory& q, const QueryParams& params) {
    validate(params);

    struct Frontier {
        const Trajectory* traj;
        std::optional<Seconds> t_min;
    };

    std::map<UserId, ExposureRecord> recorded;
    std::vector<Frontier> frontier{{&q, std::nullopt}};

    for (std::uint32_t level = 0; level < params.levels && !frontier.empty(); ++level) {
        std::vector<Frontier> next;
        std::vector<ExposureRecord> found;
        for (const auto& u : d.trajectories) {
            if (u.user == q.user || recorded.count(u.user))
                continue;
            std::optional<ExposureRecord> best;
            for (const auto& v : frontier) {
                auto t = meets(u, *v.traj, params.psi, params.tau, v.t_min);
                if (!t)
                    continue;
                if (!best || better_exposure(*t, v.traj->user, best->t_exposed, best->via))
                    best = ExposureRecord{u.user, level, *t, v.traj->user};
            }
            if (best) {
                found.push_back(*best);
                next.push_back({&u, best->t_exposed});
            }
        }
        for (const auto& r : found)
            recorded.emplace(r.user, r);
        frontier = std::move(next);
    }

    ExposureSet out;
    out.reserve(recorded.size());
    for (const auto& [user, rec] : recorded)
        out.push_back(rec);
    return out;
}

} // namespace ctq

#endif // CTQ_MODEL_HPP
