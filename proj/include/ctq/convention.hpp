#ifndef CTQ_CONVENTION_HPP
#define CTQ_CONVENTION_HPP

#include "ctq/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

/// \file
/// How raw input coordinates and timestamps map to the planar meters and
/// epoch-relative seconds used by every index. Stored with an index so query
/// files are read the same way as the data it was built from.

namespace ctq {

inline constexpr double kEarthRadiusMeters = 6371008.8;

struct IngestConvention {
    bool geographic = false; ///< inputs are (lat, lon) degrees rather than planar meters
    double lat0 = 0;         ///< projection centre, degrees
    double lon0 = 0;
    Seconds time_offset = 0; ///< subtracted from raw timestamps

    friend bool operator==(const IngestConvention&, const IngestConvention&) = default;
};

/// Equirectangular projection about (lat0, lon0): x east, y north, meters.
inline std::pair<double, double> project(const IngestConvention& c, double lat, double lon) {
    constexpr double rad = std::numbers::pi / 180.0;
    const double x = kEarthRadiusMeters * (lon - c.lon0) * rad * std::cos(c.lat0 * rad);
    const double y = kEarthRadiusMeters * (lat - c.lat0) * rad;
    return {x, y};
}

/// Converts one raw row to a sample. `a`, `b` are (x, y) or (lat, lon).
inline TrajPoint apply_convention(const IngestConvention& c, double a, double b, Seconds raw_t) {
    TrajPoint p{a, b, raw_t - c.time_offset};
    if (c.geographic) {
        const auto [x, y] = project(c, a, b);
        p.x = x;
        p.y = y;
    }
    return p;
}

} // namespace ctq

#endif // CTQ_CONVENTION_HPP
