#ifndef CTQ_BENCH_HPP
#define CTQ_BENCH_HPP

#include "ctq/baseline3d.hpp"
#include "ctq/generator.hpp"
#include "ctq/query.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

/// \file
/// Parameter sweeps comparing the QR-tree, the Q2R-tree and the baseline 3D
/// R-tree on generated workloads. One axis varies per sweep; the others stay
/// at their defaults.

namespace ctq {

enum class SweepAxis { none, psi, tau, levels, query_points, trajectories };

/// Inclusive range of query trajectory lengths.
struct PointBucket {
    std::size_t lo = 51;
    std::size_t hi = 100;

    friend bool operator==(const PointBucket&, const PointBucket&) = default;

    bool contains(std::size_t n) const { return lo <= n && n <= hi; }

    std::string label() const {
        if (hi == std::numeric_limits<std::size_t>::max())
            return ">" + std::to_string(lo - 1);
        return std::to_string(lo) + "-" + std::to_string(hi);
    }
};

inline const std::vector<PointBucket>& query_point_buckets() {
    static const std::vector<PointBucket> buckets{
        {1, 50}, {51, 100}, {101, 200}, {201, std::numeric_limits<std::size_t>::max()}};
    return buckets;
}

struct SweepSpec {
    SweepAxis axis = SweepAxis::none;
    std::vector<double> values; ///< axis values; empty selects the standard grid for the axis

    double psi = 2;
    Seconds tau = 1800;
    std::uint32_t levels = 1;
    Seconds levels_axis_tau = 60; ///< tau used while the depth axis varies
    PointBucket query_points{51, 100};
    std::size_t trajectories = 50000;

    std::size_t queries = 100;
    GenSpec gen;          ///< n_users is replaced by the trajectory count under test
    double plants_per_user = 0.1;
    Q2rParams index;      ///< also supplies the QR-tree parameters
    std::uint32_t baseline_fanout = 16;
    std::uint64_t query_seed = 2;
    unsigned threads = 1;
    bool verify = false;
};

/// Standard grid of each axis. Query-point buckets are addressed by their
/// position in query_point_buckets().
inline std::vector<double> default_axis_values(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::none: return {0};
    case SweepAxis::psi: return {1, 2, 4, 10};
    case SweepAxis::tau: return {60, 900, 1800, 3600, 10800};
    case SweepAxis::levels: return {1, 2, 3};
    case SweepAxis::query_points: return {0, 1, 2, 3};
    case SweepAxis::trajectories: return {10000, 25000, 50000, 100000};
    }
    return {};
}

inline const char* axis_name(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::none: return "none";
    case SweepAxis::psi: return "psi";
    case SweepAxis::tau: return "tau";
    case SweepAxis::levels: return "depth";
    case SweepAxis::query_points: return "query_points";
    case SweepAxis::trajectories: return "trajectories";
    }
    return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
    for (auto a : {SweepAxis::none, SweepAxis::psi, SweepAxis::tau, SweepAxis::levels, SweepAxis::query_points,
                   SweepAxis::trajectories})
        if (s == axis_name(a))
            return a;
    if (s == "levels" || s == "L")
        return SweepAxis::levels;
    throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

struct ApproachStats {
    double mean_runtime_s = 0;
    double mean_unique_reads = 0;
    double mean_raw_reads = 0;
    double mean_nodes_visited = 0;
    double mean_result_size = 0;
    std::vector<std::uint64_t> unique_reads; ///< per query, in query order
    std::vector<std::size_t> result_sizes;
};

struct SweepPoint {
    std::string label;
    QueryParams params;
    std::size_t trajectories = 0;
    PointBucket query_points;
    std::size_t queries = 0;
    ApproachStats qr, q2r, baseline;
    double qr_baseline_ratio = 0; ///< mean unique reads, QR over baseline
    double q2r_qr_ratio = 0;      ///< mean unique reads, Q2R over QR
    std::size_t mismatches = 0;   ///< queries where some index disagreed with the oracle (verify only)
};

struct SweepReport {
    SweepAxis axis = SweepAxis::none;
    std::vector<SweepPoint> points;
};

/// A generated dataset with all three indexes built over it.
struct Workload {
    Dataset dataset;
    QRIndex qr;
    Q2RIndex q2r;
    RTree3 baseline;
};

inline Workload build_workload(Dataset d, const Q2rParams& index, std::uint32_t baseline_fanout = 16) {
    Workload w;
    w.qr = build_qr(d, index.qr);
    w.q2r = build_q2r(d, index);
    w.baseline = build_baseline(d, index.qr.page_capacity, baseline_fanout);
    w.dataset = std::move(d);
    return w;
}

/// Picks `count` query trajectories whose length falls in `bucket`, without
/// replacement while enough exist.
inline std::vector<const Trajectory*> select_queries(const Dataset& d, const PointBucket& bucket, std::size_t count,
                                                     std::uint64_t seed) {
    std::vector<const Trajectory*> pool;
    for (const auto& t : d.trajectories)
        if (bucket.contains(t.points.size()))
            pool.push_back(&t);
    if (pool.empty())
        throw std::runtime_error("no trajectory has " + bucket.label() + " points");
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<const Trajectory*> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(pool[i % pool.size()]);
    return out;
}

namespace detail {

struct QueryOutcome {
    TraceResult qr, q2r, baseline;
    bool agrees = true;
};

inline void for_each_parallel(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
                body(i);
        });
}

inline ApproachStats summarize(const std::vector<QueryOutcome>& outs, TraceResult QueryOutcome::*which) {
    ApproachStats s;
    for (const auto& o : outs) {
        const TraceResult& r = o.*which;
        s.mean_runtime_s += r.stats.wall_seconds;
        s.mean_unique_reads += static_cast<double>(r.stats.unique_page_reads);
        s.mean_raw_reads += static_cast<double>(r.stats.raw_page_reads);
        s.mean_nodes_visited += static_cast<double>(r.stats.nodes_visited);
        s.mean_result_size += static_cast<double>(r.records.size());
        s.unique_reads.push_back(r.stats.unique_page_reads);
        s.result_sizes.push_back(r.records.size());
    }
    if (!outs.empty()) {
        const auto n = static_cast<double>(outs.size());
        s.mean_runtime_s /= n;
        s.mean_unique_reads /= n;
        s.mean_raw_reads /= n;
        s.mean_nodes_visited /= n;
        s.mean_result_size /= n;
    }
    return s;
}

inline double ratio(double num, double den) { return den > 0 ? num / den : 0; }

} // namespace detail

/// Runs `queries` on all three indexes of `w`. With `verify`, each answer is
/// also compared against the exhaustive oracle.
inline SweepPoint run_point(const Workload& w, const std::vector<const Trajectory*>& queries,
                            const QueryParams& params, unsigned threads, bool verify) {
    std::vector<detail::QueryOutcome> outs(queries.size());
    detail::for_each_parallel(queries.size(), threads, [&](std::size_t i) {
        const Trajectory& q = *queries[i];
        auto& o = outs[i];
        o.qr = trace(w.qr, q, params);
        o.q2r = trace(w.q2r, q, params);
        o.baseline = query_baseline(w.baseline, q, params);
        if (verify) {
            const auto expected = oracle_ctq(w.dataset, q, params);
            o.agrees = o.qr.records == expected && o.q2r.records == expected && o.baseline.records == expected;
        }
    });
    SweepPoint p;
    p.params = params;
    p.trajectories = w.dataset.trajectories.size();
    p.queries = queries.size();
    p.qr = detail::summarize(outs, &detail::QueryOutcome::qr);
    p.q2r = detail::summarize(outs, &detail::QueryOutcome::q2r);
    p.baseline = detail::summarize(outs, &detail::QueryOutcome::baseline);
    p.qr_baseline_ratio = detail::ratio(p.qr.mean_unique_reads, p.baseline.mean_unique_reads);
    p.q2r_qr_ratio = detail::ratio(p.q2r.mean_unique_reads, p.qr.mean_unique_reads);
    for (const auto& o : outs)
        p.mismatches += o.agrees ? 0 : 1;
    return p;
}

inline Dataset generate_for(const SweepSpec& spec, std::size_t n) {
    GenSpec g = spec.gen;
    g.n_users = n;
    g.random_plants = static_cast<std::size_t>(spec.plants_per_user * static_cast<double>(n));
    return generate(g).dataset;
}

/// Executes a sweep. Workloads are generated and indexed once per trajectory
/// count and reused across the other axes' values.
inline SweepReport run_sweep(const SweepSpec& spec, std::ostream* progress = nullptr) {
    SweepReport report;
    report.axis = spec.axis;
    const auto values = spec.values.empty() ? default_axis_values(spec.axis) : spec.values;

    std::map<std::size_t, Workload> cache;
    auto workload = [&](std::size_t n) -> const Workload& {
        auto it = cache.find(n);
        if (it == cache.end()) {
            if (spec.axis == SweepAxis::trajectories)
                cache.clear();
            it = cache.emplace(n, build_workload(generate_for(spec, n), spec.index, spec.baseline_fanout)).first;
        }
        return it->second;
    };

    for (double v : values) {
        QueryParams params{spec.psi, spec.tau, spec.levels};
        std::size_t n = spec.trajectories;
        PointBucket bucket = spec.query_points;
        std::ostringstream label;
        switch (spec.axis) {
        case SweepAxis::none: label << "defaults"; break;
        case SweepAxis::psi: params.psi = v; label << "psi=" << v; break;
        case SweepAxis::tau: params.tau = static_cast<Seconds>(v); label << "tau=" << params.tau; break;
        case SweepAxis::levels:
            params.levels = static_cast<std::uint32_t>(v);
            params.tau = spec.levels_axis_tau;
            label << "L=" << params.levels;
            break;
        case SweepAxis::query_points: {
            const auto& all = query_point_buckets();
            const auto i = static_cast<std::size_t>(v);
            if (i >= all.size())
                throw std::invalid_argument("query point bucket index out of range");
            bucket = all[i];
            label << "points=" << bucket.label();
            break;
        }
        case SweepAxis::trajectories: n = static_cast<std::size_t>(v); label << "n=" << n; break;
        }
        validate(params);
        const Workload& w = workload(n);
        const auto queries = select_queries(w.dataset, bucket, spec.queries, spec.query_seed);
        SweepPoint p = run_point(w, queries, params, spec.threads, spec.verify);
        p.label = label.str();
        p.query_points = bucket;
        if (progress)
            *progress << "finished " << p.label << "\n";
        report.points.push_back(std::move(p));
    }
    return report;
}

inline std::string format_report(const SweepReport& r) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %11s %11s %11s %8s %8s %8s\n", "point", "qr_ms",
                  "q2r_ms", "base_ms", "qr_reads", "q2r_reads", "base_reads", "qr:base", "q2r:qr", "results");
    out << "axis=" << axis_name(r.axis) << "\n" << line;
    for (const auto& p : r.points) {
        std::snprintf(line, sizeof line, "%-16s %10.3f %10.3f %10.3f %11.1f %11.1f %11.1f %8.3f %8.3f %8.2f\n",
                      p.label.c_str(), p.qr.mean_runtime_s * 1e3, p.q2r.mean_runtime_s * 1e3,
                      p.baseline.mean_runtime_s * 1e3, p.qr.mean_unique_reads, p.q2r.mean_unique_reads,
                      p.baseline.mean_unique_reads, p.qr_baseline_ratio, p.q2r_qr_ratio, p.qr.mean_result_size);
        out << line;
        if (p.mismatches > 0)
            out << "  VERIFY FAILED: " << p.mismatches << " queries disagree with the oracle\n";
    }
    return out.str();
}

inline nlohmann::json to_json(const ApproachStats& s) {
    return {{"mean_runtime_s", s.mean_runtime_s},       {"mean_unique_page_reads", s.mean_unique_reads},
            {"mean_raw_page_reads", s.mean_raw_reads},  {"mean_nodes_visited", s.mean_nodes_visited},
            {"mean_result_size", s.mean_result_size},   {"unique_page_reads", s.unique_reads},
            {"result_sizes", s.result_sizes}};
}

/// Machine-readable report; field names are listed in the README.
inline nlohmann::json to_json(const SweepReport& r) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : r.points)
        points.push_back({{"label", p.label},
                          {"psi", p.params.psi},
                          {"tau", p.params.tau},
                          {"depth", p.params.levels},
                          {"trajectories", p.trajectories},
                          {"query_points", p.query_points.label()},
                          {"queries", p.queries},
                          {"qr", to_json(p.qr)},
                          {"q2r", to_json(p.q2r)},
                          {"baseline", to_json(p.baseline)},
                          {"qr_baseline_ratio", p.qr_baseline_ratio},
                          {"q2r_qr_ratio", p.q2r_qr_ratio},
                          {"mismatches", p.mismatches}});
    return {{"axis", axis_name(r.axis)}, {"points", points}};
}

} // namespace ctq

#endif // CTQ_BENCH_HPP
