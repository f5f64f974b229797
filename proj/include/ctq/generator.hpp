#ifndef CTQ_GENERATOR_HPP
#define CTQ_GENERATOR_HPP

#include "ctq/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

/// \file
/// Seeded random-walk workload generator with planted contacts.

namespace ctq {

/// A contact between users `a` and `b` around (x, y) at time t. When x or y
/// is NaN the generator uses a's position at its sample nearest to t.
struct PlantedContact {
    UserId a = 0;
    UserId b = 0;
    double x = std::numeric_limits<double>::quiet_NaN();
    double y = std::numeric_limits<double>::quiet_NaN();
    Seconds t = 0;

    friend bool operator==(const PlantedContact& l, const PlantedContact& r) {
        auto same = [](double u, double v) { return u == v || (std::isnan(u) && std::isnan(v)); };
        return l.a == r.a && l.b == r.b && same(l.x, r.x) && same(l.y, r.y) && l.t == r.t;
    }
};

struct GenSpec {
    std::size_t n_users = 1000;
    std::size_t min_points = 10;
    std::size_t max_points = 250;
    double extent = 20000;     ///< trajectories live in [0, extent]^2 meters
    double mean_step = 400;    ///< mean displacement between consecutive samples, meters
    Seconds duration = 14 * 86400;
    Seconds min_active = 0; ///< each user samples within an active window of random length in
    Seconds max_active = 0; ///< [min_active, max_active] inside the duration; 0 means all of it
    std::vector<PlantedContact> planted;
    std::size_t random_plants = 0; ///< additional contacts between random user pairs
    double plant_psi = 2;          ///< planted samples lie within plant_psi / 2 of each other
    Seconds plant_tau = 1800;      ///< and within plant_tau / 2 in time
    std::uint64_t seed = 1;
    UserId first_user = 1;
};

struct Generated {
    Dataset dataset;
    std::vector<PlantedContact> contacts; ///< every plant, with resolved places and times
};

namespace detail {

inline void insert_sorted(Trajectory& t, const TrajPoint& p) {
    auto it = std::upper_bound(t.points.begin(), t.points.end(), p.t,
                               [](Seconds v, const TrajPoint& q) { return v < q.t; });
    t.points.insert(it, p);
}

inline const TrajPoint& nearest_sample(const Trajectory& t, Seconds when) {
    auto it = std::lower_bound(t.points.begin(), t.points.end(), when,
                               [](const TrajPoint& q, Seconds v) { return q.t < v; });
    if (it == t.points.end())
        return t.points.back();
    if (it != t.points.begin() && when - std::prev(it)->t <= it->t - when)
        return *std::prev(it);
    return *it;
}

} // namespace detail

/// Random-walk trajectories: each user starts at a uniform position, samples
/// at sorted uniform times within its active window, and moves by exponentially
/// distributed steps in uniform directions, reflected at the region edges.
/// Planted contacts add one sample to each participant.
inline Generated generate(const GenSpec& spec) {
    Generated out;
    out.dataset.window_days = (spec.duration + 86399) / 86400;
    if (spec.n_users == 0)
        return out;

    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<std::size_t> count(std::max<std::size_t>(1, spec.min_points),
                                                     std::max(spec.min_points, spec.max_points));
    std::uniform_real_distribution<double> coord(0, spec.extent);
    std::uniform_real_distribution<double> angle(0, 2 * std::numbers::pi);
    std::exponential_distribution<double> step(1.0 / spec.mean_step);
    std::uniform_int_distribution<Seconds> when(0, spec.duration);
    const Seconds active_hi = spec.max_active > 0 ? std::min(spec.max_active, spec.duration) : spec.duration;
    std::uniform_int_distribution<Seconds> active(std::clamp<Seconds>(spec.min_active, 0, active_hi), active_hi);

    auto reflect = [&](double v) {
        if (v < 0)
            v = -v;
        if (v > spec.extent)
            v = 2 * spec.extent - v;
        return std::clamp(v, 0.0, spec.extent);
    };

    auto& trajs = out.dataset.trajectories;
    trajs.reserve(spec.n_users);
    for (std::size_t i = 0; i < spec.n_users; ++i) {
        Trajectory t{spec.first_user + i, {}};
        std::vector<Seconds> times(count(rng));
        const Seconds span = active(rng);
        const Seconds start = std::uniform_int_distribution<Seconds>(0, spec.duration - span)(rng);
        std::uniform_int_distribution<Seconds> in_window(start, start + span);
        for (auto& s : times)
            s = in_window(rng);
        std::sort(times.begin(), times.end());
        double x = coord(rng), y = coord(rng);
        t.points.reserve(times.size() + 2);
        for (auto s : times) {
            t.points.push_back({x, y, s});
            const double len = step(rng), dir = angle(rng);
            x = reflect(x + len * std::cos(dir));
            y = reflect(y + len * std::sin(dir));
        }
        trajs.push_back(std::move(t));
    }

    auto plants = spec.planted;
    if (spec.n_users >= 2) {
        std::uniform_int_distribution<std::size_t> pick(0, spec.n_users - 1);
        for (std::size_t k = 0; k < spec.random_plants; ++k) {
            const std::size_t a = pick(rng);
            std::size_t b = pick(rng);
            while (b == a)
                b = pick(rng);
            plants.push_back({trajs[a].user, trajs[b].user, std::numeric_limits<double>::quiet_NaN(),
                              std::numeric_limits<double>::quiet_NaN(), when(rng)});
        }
    }

    std::uniform_real_distribution<double> unit(0, 1);
    std::uniform_int_distribution<Seconds> jitter_t(-spec.plant_tau / 2, spec.plant_tau / 2);
    for (auto c : plants) {
        if (c.a < spec.first_user || c.a - spec.first_user >= spec.n_users || c.b < spec.first_user
            || c.b - spec.first_user >= spec.n_users || c.a == c.b)
            throw std::invalid_argument("planted contact names an unknown or repeated user");
        auto& ta = trajs[c.a - spec.first_user];
        auto& tb = trajs[c.b - spec.first_user];
        if (std::isnan(c.x) || std::isnan(c.y)) {
            const auto& near = detail::nearest_sample(ta, c.t);
            c.x = near.x;
            c.y = near.y;
        }
        // b lands within plant_psi / 2 of a's sample, and within plant_tau / 2 in time.
        const double r = spec.plant_psi / 2 * std::sqrt(unit(rng)) * 0.999;
        const double dir = angle(rng);
        const Seconds tb_time = std::max<Seconds>(0, c.t + jitter_t(rng));
        detail::insert_sorted(ta, {c.x, c.y, c.t});
        detail::insert_sorted(tb, {c.x + r * std::cos(dir), c.y + r * std::sin(dir), tb_time});
        out.contacts.push_back(c);
    }
    return out;
}

} // namespace ctq

#endif // CTQ_GENERATOR_HPP
