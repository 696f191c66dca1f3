#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "geoconform/datamodel.hpp"
#include "geoconform/rng.hpp"

namespace geoconform {

/// Raised when per-region interval prediction hits a sub-region without a
/// calibration pool.
class MissingPoolError : public DataError {
public:
    using DataError::DataError;
};

enum class CalibrationMode : int { Pooled = 0, PerRegion = 1 };

inline std::string_view to_string(CalibrationMode m) {
    return m == CalibrationMode::Pooled ? "pooled" : "per_region";
}

/// Split-conformal calibrator. q_hat is the k-th smallest nonconformity
/// score with k = ceil((n+1)(1-alpha)); when k exceeds n the pool cannot
/// support the requested level and intervals from it are infinite, never
/// silently truncated.
struct Calibrator {
    struct Pool {
        std::vector<double> scores;  // sorted ascending, all >= 0
        double q_hat = std::numeric_limits<double>::infinity();
        bool sufficient = false;

        std::size_t n() const { return scores.size(); }
    };

    double alpha = 0.1;
    CalibrationMode mode = CalibrationMode::Pooled;
    Pool pooled;
    std::array<std::optional<Pool>, kNumSubregions> regional;

    const Pool& pool_for(Subregion region) const {
        if (mode == CalibrationMode::Pooled) return pooled;
        const auto& p = regional[static_cast<std::size_t>(region)];
        if (!p)
            throw MissingPoolError("no calibration pool for region " +
                                   std::string(to_string(region)));
        return *p;
    }
};

namespace detail {

inline Calibrator::Pool make_pool(std::vector<double> scores, double alpha) {
    for (double s : scores) {
        if (!(s >= 0.0) || !std::isfinite(s))
            throw ContractError("calibrate: nonconformity scores must be finite and >= 0");
    }
    std::sort(scores.begin(), scores.end());
    Calibrator::Pool pool;
    pool.scores = std::move(scores);
    const auto n = pool.scores.size();
    const auto k = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n + 1) * (1.0 - alpha)));
    if (k >= 1 && k <= n) {
        pool.q_hat = pool.scores[k - 1];
        pool.sufficient = true;
    }
    return pool;
}

}  // namespace detail

/// Pooled split-conformal calibration from absolute residuals.
inline Calibrator calibrate(const std::vector<double>& residuals, double alpha = 0.1) {
    if (residuals.empty()) throw ContractError("calibrate: empty residual vector");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("calibrate: alpha must be in (0,1)");
    Calibrator c;
    c.alpha = alpha;
    c.mode = CalibrationMode::Pooled;
    c.pooled = detail::make_pool(residuals, alpha);
    return c;
}

/// Region-conditional (Mondrian) calibration: one pool per sub-region seen
/// in the calibration data, plus the pooled fallback statistics.
inline Calibrator calibrate(const std::vector<double>& residuals,
                            const std::vector<Subregion>& regions, double alpha,
                            CalibrationMode mode) {
    if (mode == CalibrationMode::Pooled) return calibrate(residuals, alpha);
    if (residuals.size() != regions.size())
        throw ContractError("calibrate: residual/region length mismatch");
    if (residuals.empty()) throw ContractError("calibrate: empty residual vector");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("calibrate: alpha must be in (0,1)");

    Calibrator c;
    c.alpha = alpha;
    c.mode = CalibrationMode::PerRegion;
    c.pooled = detail::make_pool(residuals, alpha);
    std::array<std::vector<double>, kNumSubregions> buckets;
    for (std::size_t i = 0; i < residuals.size(); ++i)
        buckets[static_cast<std::size_t>(regions[i])].push_back(residuals[i]);
    for (std::size_t r = 0; r < kNumSubregions; ++r)
        if (!buckets[r].empty())
            c.regional[r] = detail::make_pool(std::move(buckets[r]), alpha);
    return c;
}

/// Point estimate with its symmetric conformal interval. Bounds are not
/// clamped to the physical range; clamping would corrupt the coverage
/// accounting.
struct IntervalPrediction {
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double q_hat = 0.0;
    Subregion pool_region = Subregion::North;  // meaningful in per-region mode
    bool pooled = true;

    bool infinite() const { return std::isinf(q_hat); }
    double width() const { return upper - lower; }
    bool covers(double y) const { return lower <= y && y <= upper; }
};

inline IntervalPrediction predict_interval(const Calibrator& c, double point,
                                           Subregion region) {
    const Calibrator::Pool& pool = c.pool_for(region);
    IntervalPrediction out;
    out.point = point;
    out.q_hat = pool.q_hat;
    out.lower = point - pool.q_hat;
    out.upper = point + pool.q_hat;
    out.pool_region = region;
    out.pooled = c.mode == CalibrationMode::Pooled;
    return out;
}

/// Fraction of true values inside their (closed) intervals.
inline double picp(const std::vector<IntervalPrediction>& intervals,
                   const std::vector<double>& y) {
    if (intervals.size() != y.size() || y.empty()) throw ContractError("picp: bad lengths");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hits += intervals[i].covers(y[i]);
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

struct MpiwResult {
    double mean_width = 0.0;
    std::size_t finite_count = 0;
    std::size_t infinite_count = 0;
};

/// Mean width over finite intervals; infinite ones are counted separately.
inline MpiwResult mpiw(const std::vector<IntervalPrediction>& intervals) {
    if (intervals.empty()) throw ContractError("mpiw: empty interval list");
    MpiwResult out;
    double sum = 0.0;
    for (const auto& iv : intervals) {
        if (iv.infinite()) {
            ++out.infinite_count;
        } else {
            sum += iv.width();
            ++out.finite_count;
        }
    }
    if (out.finite_count == 0) throw ContractError("mpiw: all intervals are infinite");
    out.mean_width = sum / static_cast<double>(out.finite_count);
    return out;
}

// ---------------------------------------------------------------------------
// Regional diagnostics
// ---------------------------------------------------------------------------

struct CoverageStats {
    double picp = 0.0;
    double mpiw = 0.0;
    std::size_t n = 0;
    std::size_t infinite_count = 0;
};

struct RegionalCoverage {
    std::map<Subregion, CoverageStats> regions;
    CoverageStats overall;
};

namespace detail {

inline CoverageStats coverage_stats(const std::vector<IntervalPrediction>& intervals,
                                    const std::vector<double>& y) {
    CoverageStats s;
    s.n = y.size();
    s.picp = picp(intervals, y);
    double sum = 0.0;
    std::size_t finite = 0;
    for (const auto& iv : intervals) {
        if (iv.infinite())
            ++s.infinite_count;
        else {
            sum += iv.width();
            ++finite;
        }
    }
    s.mpiw = finite > 0 ? sum / static_cast<double>(finite)
                        : std::numeric_limits<double>::infinity();
    return s;
}

}  // namespace detail

/// Per-sub-region PICP/MPIW for intervals on arbitrary rows.
inline RegionalCoverage regional_coverage(const std::vector<Subregion>& regions,
                                          const std::vector<double>& y,
                                          const std::vector<IntervalPrediction>& intervals) {
    if (regions.size() != y.size() || y.size() != intervals.size())
        throw ContractError("regional_coverage: bad lengths");
    RegionalCoverage out;
    out.overall = detail::coverage_stats(intervals, y);
    std::array<std::vector<std::size_t>, kNumSubregions> rows;
    for (std::size_t i = 0; i < regions.size(); ++i)
        rows[static_cast<std::size_t>(regions[i])].push_back(i);
    for (std::size_t r = 0; r < kNumSubregions; ++r) {
        if (rows[r].empty()) continue;
        std::vector<IntervalPrediction> iv;
        std::vector<double> yy;
        iv.reserve(rows[r].size());
        yy.reserve(rows[r].size());
        for (auto i : rows[r]) {
            iv.push_back(intervals[i]);
            yy.push_back(y[i]);
        }
        out.regions[kAllSubregions[r]] = detail::coverage_stats(iv, yy);
    }
    return out;
}

/// Convenience wrapper: intervals aligned 1:1 with dataset rows.
inline RegionalCoverage regional_coverage(const Dataset& ds,
                                          const std::vector<IntervalPrediction>& intervals) {
    std::vector<Subregion> regions;
    std::vector<double> y;
    regions.reserve(ds.size());
    y.reserve(ds.size());
    for (const auto& o : ds.records()) {
        regions.push_back(o.subregion);
        y.push_back(o.pm25);
    }
    return regional_coverage(regions, y, intervals);
}

// ---------------------------------------------------------------------------
// Calibration split
// ---------------------------------------------------------------------------

/// Seeded location-grouped 80/20-style split of a set of locations,
/// stratified by sub-region so every region keeps calibration coverage.
/// Returns (proper-training locations, calibration locations).
inline std::pair<std::vector<std::string>, std::vector<std::string>> calibration_split(
    const Dataset& ds, const std::vector<std::string>& locations, double cal_fraction,
    std::uint64_t seed) {
    if (!(cal_fraction > 0.0 && cal_fraction < 1.0))
        throw ContractError("calibration_split: fraction must be in (0,1)");

    std::array<std::vector<std::string>, kNumSubregions> by_region;
    for (const auto& loc : locations) {
        const auto& rows = ds.by_location().at(loc);
        by_region[static_cast<std::size_t>(ds[rows.front()].subregion)].push_back(loc);
    }
    std::vector<std::string> proper, calibration;
    for (std::size_t r = 0; r < kNumSubregions; ++r) {
        auto& locs = by_region[r];
        if (locs.empty()) continue;
        std::sort(locs.begin(), locs.end());
        rng::Engine eng(rng::mix(seed, 0xca11b ^ r));
        eng.shuffle(locs);
        const auto n = locs.size();
        auto n_cal = static_cast<std::size_t>(
            std::llround(cal_fraction * static_cast<double>(n)));
        if (n >= 2 && n_cal == 0) n_cal = 1;
        if (n_cal >= n) n_cal = n - 1;  // never drain a region's training side
        for (std::size_t i = 0; i < n; ++i)
            (i < n_cal ? calibration : proper).push_back(locs[i]);
    }
    std::sort(proper.begin(), proper.end());
    std::sort(calibration.begin(), calibration.end());
    return {std::move(proper), std::move(calibration)};
}

}  // namespace geoconform
