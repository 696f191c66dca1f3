#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "geoconform/datamodel.hpp"

namespace geoconform {

/// Month-wise mean PM2.5 per location, with fallbacks for stations the
/// model has never seen: (location, month) -> (subregion, month) ->
/// month -> global mean. The chain matters because spatial CV holds out
/// entire locations.
struct SeasonalNaiveModel {
    std::map<std::string, std::array<double, 12>> location_month;  // NaN = absent
    std::array<std::array<double, 12>, kNumSubregions> region_month{};
    std::array<std::array<bool, 12>, kNumSubregions> region_month_present{};
    std::array<double, 12> month{};
    std::array<bool, 12> month_present{};
    double global_mean = 0.0;
    std::size_t train_rows = 0;

    double predict_one(const std::string& location_id, Subregion region, int m) const {
        const std::size_t mi = static_cast<std::size_t>(m - 1);
        if (auto it = location_month.find(location_id); it != location_month.end()) {
            const double v = it->second[mi];
            if (!std::isnan(v)) return v;
        }
        const std::size_t ri = static_cast<std::size_t>(region);
        if (region_month_present[ri][mi]) return region_month[ri][mi];
        if (month_present[mi]) return month[mi];
        return global_mean;
    }

    bool operator==(const SeasonalNaiveModel&) const = default;
};

inline SeasonalNaiveModel train_seasonal_naive(const Dataset& ds,
                                               const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw ContractError("train_seasonal_naive: empty training set");

    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
    };
    std::map<std::string, std::array<Acc, 12>> by_loc;
    std::array<std::array<Acc, 12>, kNumSubregions> by_region{};
    std::array<Acc, 12> by_month{};
    Acc global;

    for (auto r : rows) {
        const Observation& o = ds[r];
        const std::size_t mi = static_cast<std::size_t>(o.timestamp.month - 1);
        auto& la = by_loc[o.location_id][mi];
        la.sum += o.pm25;
        ++la.n;
        auto& ra = by_region[static_cast<std::size_t>(o.subregion)][mi];
        ra.sum += o.pm25;
        ++ra.n;
        by_month[mi].sum += o.pm25;
        ++by_month[mi].n;
        global.sum += o.pm25;
        ++global.n;
    }

    SeasonalNaiveModel model;
    model.train_rows = rows.size();
    model.global_mean = global.sum / static_cast<double>(global.n);
    for (const auto& [loc, accs] : by_loc) {
        auto& dest = model.location_month[loc];
        for (std::size_t m = 0; m < 12; ++m)
            dest[m] = accs[m].n > 0 ? accs[m].sum / static_cast<double>(accs[m].n)
                                    : std::numeric_limits<double>::quiet_NaN();
    }
    for (std::size_t r = 0; r < kNumSubregions; ++r)
        for (std::size_t m = 0; m < 12; ++m)
            if (by_region[r][m].n > 0) {
                model.region_month[r][m] =
                    by_region[r][m].sum / static_cast<double>(by_region[r][m].n);
                model.region_month_present[r][m] = true;
            }
    for (std::size_t m = 0; m < 12; ++m)
        if (by_month[m].n > 0) {
            model.month[m] = by_month[m].sum / static_cast<double>(by_month[m].n);
            model.month_present[m] = true;
        }
    return model;
}

}  // namespace geoconform
