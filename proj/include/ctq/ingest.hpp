#ifndef CTQ_INGEST_HPP
#define CTQ_INGEST_HPP

#include "ctq/convention.hpp"
#include "ctq/model.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

/// \file
/// CSV ingestion of location samples (`user_id,x,y,t`, or `user_id,lat,lon,t`
/// in geographic mode) into per-user time-sorted trajectories.

namespace ctq {

enum class EpochPolicy {
    as_is,        ///< timestamps are already seconds since the epoch
    shift_to_min, ///< subtract the smallest timestamp in the file
};

/// Zero-based column positions. A header row naming `user_id`/`user`,
/// `x`/`lat`, `y`/`lon` and `t`/`timestamp` overrides them.
struct ColumnMap {
    std::size_t user = 0;
    std::size_t a = 1; ///< x, or latitude in geographic mode
    std::size_t b = 2; ///< y, or longitude in geographic mode
    std::size_t t = 3;
};

struct IngestOptions {
    std::filesystem::path path;
    ColumnMap columns;
    bool geographic = false;
    EpochPolicy epoch = EpochPolicy::as_is;
    std::optional<std::int64_t> window_days; ///< computed from the time span when absent
};

struct IngestResult {
    Dataset dataset;
    IngestConvention convention;
    std::size_t rows_read = 0;
    std::size_t rows_skipped = 0;
    std::vector<std::string> problems; ///< one message per skipped row, with its line number
};

class IngestError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct RawRow {
    UserId user;
    double a;
    double b;
    Seconds t;
};

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t'))
            field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
            field.remove_suffix(1);
        out.push_back(field);
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

template <class T>
bool parse_field(std::string_view s, T& out) {
    if (s.empty())
        return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::optional<ColumnMap> header_columns(const std::vector<std::string_view>& fields) {
    ColumnMap m;
    int found = 0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        std::string name(fields[i]);
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        if (name == "user_id" || name == "user")
            m.user = i, found |= 1;
        else if (name == "x" || name == "lat" || name == "latitude")
            m.a = i, found |= 2;
        else if (name == "y" || name == "lon" || name == "lng" || name == "longitude")
            m.b = i, found |= 4;
        else if (name == "t" || name == "timestamp" || name == "time")
            m.t = i, found |= 8;
    }
    if (found != 15)
        return std::nullopt;
    return m;
}

/// Reads rows, skipping malformed ones. The first line may be a header.
inline std::vector<RawRow> read_rows(std::istream& in, ColumnMap columns, IngestResult& result) {
    std::vector<RawRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto fields = split_csv(line);
        if (line_no == 1) {
            if (auto header = header_columns(fields)) {
                columns = *header;
                continue;
            }
        }
        ++result.rows_read;
        RawRow row{};
        const std::size_t need = std::max({columns.user, columns.a, columns.b, columns.t}) + 1;
        const bool ok = fields.size() >= need && parse_field(fields[columns.user], row.user)
                        && parse_field(fields[columns.a], row.a) && parse_field(fields[columns.b], row.b)
                        && parse_field(fields[columns.t], row.t) && std::isfinite(row.a) && std::isfinite(row.b);
        if (!ok) {
            ++result.rows_skipped;
            result.problems.push_back("line " + std::to_string(line_no) + ": malformed row");
            continue;
        }
        rows.push_back(row);
    }
    return rows;
}

/// Groups converted rows per user; equal timestamps keep input order.
inline std::vector<Trajectory> group_rows(const std::vector<RawRow>& rows, const IngestConvention& c) {
    std::map<UserId, Trajectory> by_user;
    for (const auto& r : rows) {
        auto& t = by_user[r.user];
        t.user = r.user;
        t.points.push_back(apply_convention(c, r.a, r.b, r.t));
    }
    std::vector<Trajectory> out;
    out.reserve(by_user.size());
    for (auto& [user, t] : by_user) {
        std::stable_sort(t.points.begin(), t.points.end(),
                         [](const TrajPoint& a, const TrajPoint& b) { return a.t < b.t; });
        out.push_back(std::move(t));
    }
    return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IngestError("cannot read " + path.string());
    return in;
}

} // namespace detail

/// Parses a CSV stream into a dataset, choosing the projection centre and
/// epoch from the data itself.
inline IngestResult ingest_csv(std::istream& in, const IngestOptions& opts) {
    IngestResult result;
    const auto rows = detail::read_rows(in, opts.columns, result);
    if (rows.empty())
        throw IngestError("no valid rows in " + (opts.path.empty() ? std::string("input") : opts.path.string()));

    auto& c = result.convention;
    c.geographic = opts.geographic;
    if (c.geographic) {
        double lat = 0, lon = 0;
        for (const auto& r : rows) {
            lat += r.a;
            lon += r.b;
        }
        c.lat0 = lat / static_cast<double>(rows.size());
        c.lon0 = lon / static_cast<double>(rows.size());
    }
    Seconds t_min = rows.front().t, t_max = rows.front().t;
    for (const auto& r : rows) {
        t_min = std::min(t_min, r.t);
        t_max = std::max(t_max, r.t);
    }
    if (opts.epoch == EpochPolicy::shift_to_min)
        c.time_offset = t_min;

    result.dataset.trajectories = detail::group_rows(rows, c);
    result.dataset.window_days = opts.window_days ? *opts.window_days : (t_max - t_min) / 86400 + 1;
    validate(result.dataset);
    return result;
}

inline IngestResult ingest_csv(const IngestOptions& opts) {
    auto in = detail::open_input(opts.path);
    return ingest_csv(in, opts);
}

/// Reads query trajectories under the convention of an existing index.
/// Samples that would fall before the index epoch mean the file was written
/// under a different time convention.
inline IngestResult ingest_with_convention(std::istream& in, const IngestConvention& c, ColumnMap columns = {}) {
    IngestResult result;
    result.convention = c;
    const auto rows = detail::read_rows(in, columns, result);
    if (rows.empty())
        throw IngestError("no valid rows in query input");
    for (const auto& r : rows)
        if (r.t < c.time_offset)
            throw IngestError("mismatched epoch conventions: timestamp " + std::to_string(r.t)
                              + " precedes the index epoch");
    result.dataset.trajectories = detail::group_rows(rows, c);
    validate(result.dataset);
    return result;
}

inline IngestResult ingest_with_convention(const std::filesystem::path& path, const IngestConvention& c,
                                           ColumnMap columns = {}) {
    auto in = detail::open_input(path);
    return ingest_with_convention(in, c, columns);
}

/// Writes samples as `user_id,x,y,t` rows with a header line.
inline void write_csv(std::ostream& out, const Dataset& d) {
    out << "user_id,x,y,t\n";
    char buf[64];
    for (const auto& t : d.trajectories)
        for (const auto& p : t.points) {
            out << t.user << ',';
            auto r = std::to_chars(buf, buf + sizeof buf, p.x);
            out.write(buf, r.ptr - buf) << ',';
            r = std::to_chars(buf, buf + sizeof buf, p.y);
            out.write(buf, r.ptr - buf) << ',' << p.t << '\n';
        }
}

} // namespace ctq

#endif // CTQ_INGEST_HPP
