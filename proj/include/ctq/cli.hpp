#ifndef CTQ_CLI_HPP
#define CTQ_CLI_HPP

#include "ctq/bench.hpp"
#include "ctq/checks.hpp"
#include "ctq/generator.hpp"
#include "ctq/ingest.hpp"
#include "ctq/persist.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

/// \file
/// The `ctq` command line: gen, build, query, bench and verify. Exit codes are
/// 0 on success, 2 when a verification fails and 1 for any other error.

namespace ctq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVerifyFailed = 2;

/// Summary figures of a built index, printed as key=value lines.
struct IndexStats {
    std::string kind;
    std::size_t trajectories = 0;
    std::size_t leaves = 0;
    std::size_t pages = 0;
    std::uint32_t depth = 0;
    std::size_t page_bytes = 0;
    std::size_t top_nodes = 0;    ///< Q2R only
    std::size_t owning_nodes = 0; ///< Q2R only
};

namespace detail {

inline std::size_t leaf_count(const QuadTree& t) {
    return static_cast<std::size_t>(std::count_if(t.nodes.begin(), t.nodes.end(), [](const QuadNode& n) { return n.is_leaf(); }));
}

inline std::uint32_t tree_depth(const QuadTree& t) {
    std::uint32_t d = 0;
    for (const auto& n : t.nodes)
        d = std::max(d, n.depth);
    return d;
}

inline std::uint32_t rtree_height(const RTree3& t) {
    if (t.nodes.empty())
        return 0;
    std::uint32_t h = 1;
    for (std::uint32_t id = t.root; !t.nodes[id].leaf; id = t.nodes[id].children.front())
        ++h;
    return h;
}

} // namespace detail

inline IndexStats index_stats(const AnyIndex& any) {
    IndexStats s;
    const PageStore& store = pages_of(any);
    s.pages = store.page_count();
    s.page_bytes = store.total_bytes();
    std::visit(
        [&](const auto& index) {
            using T = std::decay_t<decltype(index)>;
            if constexpr (std::is_same_v<T, QRIndex>) {
                s.kind = "qr";
                s.leaves = detail::leaf_count(index.tree);
                s.depth = detail::tree_depth(index.tree);
                for (const auto& a : index.assignments)
                    s.trajectories += a.members.size();
            } else if constexpr (std::is_same_v<T, Q2RIndex>) {
                s.kind = "q2r";
                s.top_nodes = index.nodes.size();
                for (const auto& n : index.nodes) {
                    s.trajectories += n.owned.size();
                    s.depth = std::max(s.depth, n.depth);
                    if (!n.qr)
                        continue;
                    ++s.owning_nodes;
                    s.leaves += detail::leaf_count(n.qr->tree);
                }
            } else {
                s.kind = "baseline";
                s.leaves = index.leaf_count();
                s.depth = detail::rtree_height(index);
                for (const auto& n : index.nodes)
                    s.trajectories += n.members.size();
            }
        },
        any);
    return s;
}

inline void print_stats(std::ostream& out, const IndexStats& s) {
    out << "index=" << s.kind << "\n"
        << "trajectories=" << s.trajectories << "\n"
        << "leaves=" << s.leaves << "\n"
        << "pages=" << s.pages << "\n"
        << "depth=" << s.depth << "\n"
        << "page_bytes=" << s.page_bytes << "\n";
    if (s.kind == "q2r")
        out << "top_nodes=" << s.top_nodes << "\n"
            << "owning_nodes=" << s.owning_nodes << "\n";
}

namespace detail {

struct GenArgs {
    GenSpec spec;
    double days = 14;
    std::vector<std::string> plants; ///< "a,b,t"
    std::string out;
    std::string contacts_out;
};

struct BuildArgs {
    std::string data;
    bool geo = false;
    std::string epoch = "as_is";
    std::optional<std::int64_t> window_days;
    std::string kind = "qr";
    Q2rParams params;
    std::uint32_t fanout = 16;
    std::string out;
};

struct QueryArgs {
    std::string index_file;
    std::optional<UserId> user;
    std::string query_file;
    QueryParams params;
    bool verify = false;
    std::string report;
};

struct BenchArgs {
    SweepSpec spec;
    std::string axis = "none";
    std::size_t bucket = 1;
    double days = 14;
    std::string report;
};

struct VerifyArgs {
    std::string data;
    std::string index_file;
    bool geo = false;
    std::size_t queries = 100;
    std::uint64_t seed = 1;
    Q2rParams params;
};

inline PlantedContact parse_plant(const std::string& s) {
    const auto fields = split_csv(s);
    PlantedContact c;
    if (fields.size() != 3 || !parse_field(fields[0], c.a) || !parse_field(fields[1], c.b)
        || !parse_field(fields[2], c.t))
        throw std::invalid_argument("--plant expects a,b,t (got '" + s + "')");
    return c;
}

inline int cmd_gen(GenArgs& a, std::ostream& out) {
    a.spec.duration = static_cast<Seconds>(a.days * 86400);
    for (const auto& p : a.plants)
        a.spec.planted.push_back(parse_plant(p));
    const auto g = generate(a.spec);
    std::ofstream f(a.out);
    if (!f)
        throw std::runtime_error("cannot write " + a.out);
    write_csv(f, g.dataset);
    if (!a.contacts_out.empty()) {
        std::ofstream c(a.contacts_out);
        if (!c)
            throw std::runtime_error("cannot write " + a.contacts_out);
        c << "a,b,x,y,t\n";
        for (const auto& p : g.contacts)
            c << p.a << ',' << p.b << ',' << p.x << ',' << p.y << ',' << p.t << '\n';
    }
    std::size_t points = 0;
    for (const auto& t : g.dataset.trajectories)
        points += t.points.size();
    out << "users=" << g.dataset.trajectories.size() << "\n"
        << "points=" << points << "\n"
        << "contacts=" << g.contacts.size() << "\n";
    return kExitOk;
}

inline IngestResult ingest_reporting(const std::string& path, bool geo, EpochPolicy epoch,
                                     std::optional<std::int64_t> window_days, std::ostream& err) {
    IngestOptions opts;
    opts.path = path;
    opts.geographic = geo;
    opts.epoch = epoch;
    opts.window_days = window_days;
    auto r = ingest_csv(opts);
    for (const auto& p : r.problems)
        err << path << ": " << p << "\n";
    return r;
}

inline AnyIndex build_kind(const std::string& kind, const Dataset& d, const Q2rParams& p, std::uint32_t fanout) {
    if (kind == "qr")
        return build_qr(d, p.qr);
    if (kind == "q2r")
        return build_q2r(d, p);
    return build_baseline(d, p.qr.page_capacity, fanout);
}

inline int cmd_build(const BuildArgs& a, std::ostream& out, std::ostream& err) {
    const auto epoch = a.epoch == "shift_to_min" ? EpochPolicy::shift_to_min : EpochPolicy::as_is;
    auto in = ingest_reporting(a.data, a.geo, epoch, a.window_days, err);
    IndexFile file{in.convention, in.dataset.window_days, build_kind(a.kind, in.dataset, a.params, a.fanout)};
    save_index(a.out, file);
    std::size_t points = 0;
    for (const auto& t : in.dataset.trajectories)
        points += t.points.size();
    print_stats(out, index_stats(file.index));
    out << "points=" << points << "\n"
        << "rows_skipped=" << in.rows_skipped << "\n"
        << "bytes=" << std::filesystem::file_size(a.out) << "\n";
    return kExitOk;
}

inline Dataset dataset_of(const AnyIndex& index, std::int64_t window_days) {
    Dataset d{dump_trajectories(pages_of(index)), window_days};
    std::sort(d.trajectories.begin(), d.trajectories.end(),
              [](const Trajectory& x, const Trajectory& y) { return x.user < y.user; });
    return d;
}

inline int cmd_query(const QueryArgs& a, std::ostream& out, std::ostream& err) {
    const IndexFile file = load_index(a.index_file);
    const Dataset d = dataset_of(file.index, file.window_days);

    Trajectory q;
    if (!a.query_file.empty()) {
        auto in = ingest_with_convention(a.query_file, file.convention);
        const auto& ts = in.dataset.trajectories;
        if (a.user) {
            auto it = std::find_if(ts.begin(), ts.end(), [&](const Trajectory& t) { return t.user == *a.user; });
            if (it == ts.end())
                throw std::runtime_error("user " + std::to_string(*a.user) + " not in " + a.query_file);
            q = *it;
        } else if (ts.size() == 1) {
            q = ts.front();
        } else {
            throw std::runtime_error(a.query_file + " holds several users; choose one with --user");
        }
    } else if (a.user) {
        auto it = std::find_if(d.trajectories.begin(), d.trajectories.end(),
                               [&](const Trajectory& t) { return t.user == *a.user; });
        if (it == d.trajectories.end())
            throw std::runtime_error("user " + std::to_string(*a.user) + " is not indexed");
        q = *it;
    } else {
        throw std::runtime_error("give --user or --query-file");
    }

    const auto result = trace_any(file.index, q, a.params);
    out << result.records.size() << " records\n";
    for (const auto& r : result.records)
        out << "record user=" << r.user << " level=" << r.level << " t_exposed=" << r.t_exposed << " via=" << r.via
            << "\n";
    out << "records=" << result.records.size() << "\n"
        << "wall_seconds=" << result.stats.wall_seconds << "\n"
        << "unique_page_reads=" << result.stats.unique_page_reads << "\n"
        << "raw_page_reads=" << result.stats.raw_page_reads << "\n"
        << "nodes_visited=" << result.stats.nodes_visited << "\n"
        << "candidates_tested=" << result.stats.candidates_tested << "\n";

    bool verified = true;
    if (a.verify) {
        verified = oracle_ctq(d, q, a.params) == result.records;
        out << "verify=" << (verified ? "ok" : "FAIL") << "\n";
        if (!verified)
            err << "index answer differs from the exhaustive oracle\n";
    }
    if (!a.report.empty()) {
        nlohmann::json records = nlohmann::json::array();
        for (const auto& r : result.records)
            records.push_back({{"user", r.user}, {"level", r.level}, {"t_exposed", r.t_exposed}, {"via", r.via}});
        nlohmann::json j{{"query_user", q.user},
                         {"psi", a.params.psi},
                         {"tau", a.params.tau},
                         {"depth", a.params.levels},
                         {"records", records},
                         {"stats",
                          {{"wall_seconds", result.stats.wall_seconds},
                           {"unique_page_reads", result.stats.unique_page_reads},
                           {"raw_page_reads", result.stats.raw_page_reads},
                           {"nodes_visited", result.stats.nodes_visited},
                           {"candidates_tested", result.stats.candidates_tested}}}};
        if (a.verify)
            j["verified"] = verified;
        std::ofstream(a.report) << j.dump(2) << "\n";
    }
    return verified ? kExitOk : kExitVerifyFailed;
}

inline int cmd_bench(BenchArgs& a, std::ostream& out, std::ostream& err) {
    a.spec.axis = parse_axis(a.axis);
    a.spec.gen.duration = static_cast<Seconds>(a.days * 86400);
    const auto& buckets = query_point_buckets();
    if (a.bucket >= buckets.size())
        throw std::invalid_argument("--points-bucket must be 0..3");
    a.spec.query_points = buckets[a.bucket];
    const auto report = run_sweep(a.spec, &err);
    out << format_report(report);
    if (!a.report.empty())
        std::ofstream(a.report) << to_json(report).dump(2) << "\n";
    std::size_t mismatches = 0;
    for (const auto& p : report.points)
        mismatches += p.mismatches;
    if (a.spec.verify)
        out << "verify=" << (mismatches == 0 ? "ok" : "FAIL") << "\n";
    return mismatches == 0 ? kExitOk : kExitVerifyFailed;
}

inline int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
    Dataset d;
    std::vector<AnyIndex> indexes;
    if (!a.index_file.empty()) {
        IndexFile file = load_index(a.index_file);
        d = dataset_of(file.index, file.window_days);
        indexes.push_back(std::move(file.index));
    } else if (!a.data.empty()) {
        d = ingest_reporting(a.data, a.geo, EpochPolicy::as_is, std::nullopt, err).dataset;
        indexes.push_back(build_qr(d, a.params.qr));
        indexes.push_back(build_q2r(d, a.params));
        indexes.push_back(build_baseline(d, a.params.qr.page_capacity));
    } else {
        throw std::runtime_error("give --data or --index-file");
    }

    Violations violations;
    for (const auto& any : indexes) {
        Violations v = std::visit(
            [&](const auto& index) {
                using T = std::decay_t<decltype(index)>;
                if constexpr (std::is_same_v<T, QRIndex>)
                    return check_qr(index, d.trajectories);
                else if constexpr (std::is_same_v<T, Q2RIndex>)
                    return check_q2r(index, d);
                else
                    return check_baseline(index, d);
            },
            any);
        for (auto& s : v)
            violations.push_back(index_stats(any).kind + ": " + s);
    }
    for (const auto& v : violations)
        err << "invariant violated: " << v << "\n";
    out << "invariants=" << (violations.empty() ? "ok" : "FAIL") << "\n";

    std::size_t mismatches = 0;
    if (!d.trajectories.empty()) {
        std::mt19937_64 rng(a.seed);
        const double psis[] = {1, 2, 4, 10};
        const Seconds taus[] = {60, 900, 1800, 3600};
        std::uniform_int_distribution<std::size_t> pick_user(0, d.trajectories.size() - 1), pick4(0, 3);
        std::uniform_int_distribution<std::uint32_t> pick_depth(1, 3);
        for (std::size_t i = 0; i < a.queries; ++i) {
            const Trajectory& q = d.trajectories[pick_user(rng)];
            const QueryParams p{psis[pick4(rng)], taus[pick4(rng)], pick_depth(rng)};
            const auto expected = oracle_ctq(d, q, p);
            for (const auto& any : indexes) {
                if (trace_any(any, q, p).records != expected) {
                    ++mismatches;
                    err << "mismatch: " << index_stats(any).kind << " user=" << q.user << " psi=" << p.psi
                        << " tau=" << p.tau << " depth=" << p.levels << "\n";
                }
            }
        }
    }
    out << "queries=" << a.queries << "\n"
        << "mismatches=" << mismatches << "\n"
        << "verify=" << (violations.empty() && mismatches == 0 ? "ok" : "FAIL") << "\n";
    return violations.empty() && mismatches == 0 ? kExitOk : kExitVerifyFailed;
}

inline void add_index_params(CLI::App* cmd, Q2rParams& p) {
    cmd->add_option("--theta", p.qr.theta, "quadtree leaf capacity in points")->capture_default_str();
    cmd->add_option("--page-cap", p.qr.page_capacity, "trajectories per disk page")->capture_default_str();
    cmd->add_option("--bucket-width", p.qr.bucket_width, "time bucket width in seconds")->capture_default_str();
    cmd->add_option("--max-depth", p.qr.max_depth, "maximum quadtree depth")->capture_default_str();
    cmd->add_option("--theta-traj", p.theta_traj, "Q2R top-tree split threshold in trajectories")
        ->capture_default_str();
}

inline void add_query_params(CLI::App* cmd, QueryParams& p) {
    cmd->add_option("--psi", p.psi, "spatial threshold in meters")->capture_default_str();
    cmd->add_option("--tau", p.tau, "temporal threshold in seconds")->capture_default_str();
    cmd->add_option("--depth", p.levels, "maximum tracing depth L")->capture_default_str();
}

} // namespace detail

/// Parses `argv` and runs the chosen subcommand, writing to `out` and `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Contact tracing queries over trajectory indexes", "ctq"};
    app.require_subcommand(1);

    detail::GenArgs gen;
    auto* g = app.add_subcommand("gen", "generate a random-walk dataset with planted contacts");
    g->add_option("--users", gen.spec.n_users, "number of users")->required();
    g->add_option("--min-points", gen.spec.min_points)->capture_default_str();
    g->add_option("--max-points", gen.spec.max_points)->capture_default_str();
    g->add_option("--extent", gen.spec.extent, "side of the square region in meters")->capture_default_str();
    g->add_option("--step", gen.spec.mean_step, "mean step length in meters")->capture_default_str();
    g->add_option("--days", gen.days, "time span in days")->capture_default_str();
    g->add_option("--min-active", gen.spec.min_active, "shortest per-user active window, seconds");
    g->add_option("--max-active", gen.spec.max_active, "longest per-user active window, seconds");
    g->add_option("--plants", gen.spec.random_plants, "random planted contacts")->capture_default_str();
    g->add_option("--plant", gen.plants, "explicit planted contact a,b,t (repeatable)");
    g->add_option("--seed", gen.spec.seed)->capture_default_str();
    g->add_option("--out", gen.out, "output CSV")->required();
    g->add_option("--contacts-out", gen.contacts_out, "CSV of planted contacts");

    detail::BuildArgs build;
    auto* b = app.add_subcommand("build", "build and persist an index");
    b->add_option("--data", build.data, "input CSV")->required()->check(CLI::ExistingFile);
    b->add_flag("--geo", build.geo, "columns are user_id,lat,lon,t");
    b->add_option("--epoch", build.epoch, "as_is or shift_to_min")
        ->check(CLI::IsMember({"as_is", "shift_to_min"}))
        ->capture_default_str();
    b->add_option("--window-days", build.window_days, "length of the covered history in days");
    b->add_option("--index", build.kind, "qr, q2r or baseline")
        ->check(CLI::IsMember({"qr", "q2r", "baseline"}))
        ->capture_default_str();
    detail::add_index_params(b, build.params);
    b->add_option("--fanout", build.fanout, "baseline internal fanout")->capture_default_str();
    b->add_option("--out", build.out, "index file")->required();

    detail::QueryArgs query;
    auto* q = app.add_subcommand("query", "run a contact tracing query");
    q->add_option("--index-file", query.index_file, "index built by `ctq build`")->required()->check(CLI::ExistingFile);
    q->add_option("--user", query.user, "query user id");
    q->add_option("--query-file", query.query_file, "CSV with the query trajectory")->check(CLI::ExistingFile);
    detail::add_query_params(q, query.params);
    q->add_flag("--verify", query.verify, "compare against the exhaustive oracle");
    q->add_option("--report", query.report, "JSON report file");

    detail::BenchArgs bench;
    auto* s = app.add_subcommand("bench", "parameter sweep over generated workloads");
    s->add_option("--axis", bench.axis, "none, psi, tau, depth, query_points or trajectories")->capture_default_str();
    s->add_option("--values", bench.spec.values, "axis values (query_points takes bucket indexes 0..3)");
    s->add_option("--trajectories", bench.spec.trajectories)->capture_default_str();
    s->add_option("--queries", bench.spec.queries)->capture_default_str();
    s->add_option("--psi", bench.spec.psi)->capture_default_str();
    s->add_option("--tau", bench.spec.tau)->capture_default_str();
    s->add_option("--depth", bench.spec.levels)->capture_default_str();
    s->add_option("--points-bucket", bench.bucket, "0: 1-50, 1: 51-100, 2: 101-200, 3: >200")->capture_default_str();
    s->add_option("--step", bench.spec.gen.mean_step)->capture_default_str();
    s->add_option("--extent", bench.spec.gen.extent)->capture_default_str();
    s->add_option("--days", bench.days)->capture_default_str();
    s->add_option("--seed", bench.spec.gen.seed)->capture_default_str();
    detail::add_index_params(s, bench.spec.index);
    s->add_option("--threads", bench.spec.threads)->capture_default_str();
    s->add_flag("--verify", bench.spec.verify, "check every answer against the oracle");
    s->add_option("--report", bench.report, "JSON report file");

    detail::VerifyArgs verify;
    auto* v = app.add_subcommand("verify", "check index invariants and random queries against the oracle");
    v->add_option("--data", verify.data, "input CSV")->check(CLI::ExistingFile);
    v->add_option("--index-file", verify.index_file, "index file")->check(CLI::ExistingFile);
    v->add_flag("--geo", verify.geo);
    v->add_option("--queries", verify.queries)->capture_default_str();
    v->add_option("--seed", verify.seed)->capture_default_str();
    detail::add_index_params(v, verify.params);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (*g)
            return detail::cmd_gen(gen, out);
        if (*b)
            return detail::cmd_build(build, out, err);
        if (*q)
            return detail::cmd_query(query, out, err);
        if (*s)
            return detail::cmd_bench(bench, out, err);
        return detail::cmd_verify(verify, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

} // namespace ctq

#endif // CTQ_CLI_HPP
