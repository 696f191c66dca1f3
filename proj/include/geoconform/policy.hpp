#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "geoconform/conformal.hpp"
#include "geoconform/datamodel.hpp"

namespace geoconform {

enum class ReliabilityFlag : int { Unreliable = 0, Low = 1, Medium = 2, High = 3 };

inline std::string_view to_string(ReliabilityFlag f) {
    switch (f) {
        case ReliabilityFlag::High: return "high";
        case ReliabilityFlag::Medium: return "medium";
        case ReliabilityFlag::Low: return "low";
        case ReliabilityFlag::Unreliable: return "unreliable";
    }
    return "?";
}

/// Trust tier from a regional R^2 and the mean conformal interval
/// half-width, first matching case wins:
///   High       r2 > 0.1  and w < 40
///   Medium     r2 > 0    and w < 80
///   Low        r2 > -0.5 and w < 100
///   Unreliable otherwise.
/// Boundaries are strict; an infinite half-width is always Unreliable.
inline ReliabilityFlag reliability_flag(double r2, double half_width) {
    if (!(half_width >= 0.0)) throw ContractError("reliability_flag: half_width must be >= 0");
    if (r2 > 0.1 && half_width < 40.0) return ReliabilityFlag::High;
    if (r2 > 0.0 && half_width < 80.0) return ReliabilityFlag::Medium;
    if (r2 > -0.5 && half_width < 100.0) return ReliabilityFlag::Low;
    return ReliabilityFlag::Unreliable;
}

struct PriorityScore {
    double score = 0.0;
    double half_width = 0.0;
    double pop_density = 0.0;
};

/// Monitor prioritisation: half-width times log(1 + population density),
/// natural logarithm. Zero iff either input is zero.
inline PriorityScore priority_score(double half_width, double pop_density) {
    if (!(half_width >= 0.0)) throw ContractError("priority_score: half_width must be >= 0");
    if (!(pop_density >= 0.0)) throw ContractError("priority_score: pop_density must be >= 0");
    return {half_width * std::log1p(pop_density), half_width, pop_density};
}

// ---------------------------------------------------------------------------
// Regional flagging
// ---------------------------------------------------------------------------

struct RegionFlagInput {
    double r2 = 0.0;
    double half_width = 0.0;  // MPIW / 2
};

struct LocationFlagInput {
    std::string location_id;
    Subregion subregion = Subregion::North;
    std::size_t n_rows = 0;
    double r2 = 0.0;          // out-of-fold, per location
    double half_width = 0.0;  // mean over that location's intervals
};

struct RegionFlags {
    ReliabilityFlag flag = ReliabilityFlag::Unreliable;
    std::array<double, 4> histogram{};  // fraction of locations per flag, by enum value
    std::size_t n_locations = 0;
};

/// One flag per region from its aggregates plus a per-location flag
/// histogram. Locations with fewer than `min_rows` out-of-fold rows cannot
/// support an R^2 estimate and are flagged Unreliable.
inline std::map<Subregion, RegionFlags> flag_regions(
    const std::map<Subregion, RegionFlagInput>& regional,
    const std::vector<LocationFlagInput>& locations, std::size_t min_rows = 10) {
    std::map<Subregion, RegionFlags> out;
    for (const auto& [region, in] : regional)
        out[region].flag = reliability_flag(in.r2, in.half_width);
    for (const auto& loc : locations) {
        auto& bucket = out[loc.subregion];
        const ReliabilityFlag f = loc.n_rows < min_rows
                                      ? ReliabilityFlag::Unreliable
                                      : reliability_flag(loc.r2, loc.half_width);
        bucket.histogram[static_cast<std::size_t>(f)] += 1.0;
        ++bucket.n_locations;
    }
    for (auto& [region, flags] : out)
        if (flags.n_locations > 0)
            for (auto& h : flags.histogram) h /= static_cast<double>(flags.n_locations);
    return out;
}

// ---------------------------------------------------------------------------
// Site ranking
// ---------------------------------------------------------------------------

struct CandidateSite {
    std::string id;
    double half_width = 0.0;
    double pop_density = 0.0;
};

struct RankedSite {
    std::string id;
    double half_width = 0.0;
    double pop_density = 0.0;
    double score = 0.0;
};

/// Candidates sorted by priority score descending, ties by id ascending.
inline std::vector<RankedSite> rank_sites(const std::vector<CandidateSite>& sites) {
    std::vector<RankedSite> ranked;
    ranked.reserve(sites.size());
    for (const auto& s : sites) {
        const PriorityScore p = priority_score(s.half_width, s.pop_density);
        ranked.push_back({s.id, s.half_width, s.pop_density, p.score});
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedSite& a, const RankedSite& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    return ranked;
}

}  // namespace geoconform
