#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "geoconform/datamodel.hpp"

namespace geoconform {

enum class FeatureGroup : int {
    Geographic = 0,
    Temporal = 1,
    Atmospheric = 2,
    Meteorological = 3,
    Demographic = 4,
};

inline constexpr int kNumFeatureGroups = 5;

inline constexpr std::array<FeatureGroup, kNumFeatureGroups> kAllFeatureGroups = {
    FeatureGroup::Geographic, FeatureGroup::Temporal, FeatureGroup::Atmospheric,
    FeatureGroup::Meteorological, FeatureGroup::Demographic};

inline std::string_view to_string(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::Geographic: return "geographic";
        case FeatureGroup::Temporal: return "temporal";
        case FeatureGroup::Atmospheric: return "atmospheric";
        case FeatureGroup::Meteorological: return "meteorological";
        case FeatureGroup::Demographic: return "demographic";
    }
    return "?";
}

/// Model-ready feature columns, in fixed order. This ordering is a public
/// contract; serialized models record it.
inline constexpr std::array<std::string_view, 15> kFeatureNames = {
    "latitude",    "longitude",     "month_sin",   "month_cos",     "harmattan_flag",
    "sat_aot",     "sat_no2",       "sat_pblh",    "temperature",   "humidity",
    "pressure",    "wind_speed",    "precipitation", "clouds",      "population_density"};

inline constexpr int kNumFeatures = 15;

inline constexpr std::array<FeatureGroup, kNumFeatures> kFeatureGroupTags = {
    FeatureGroup::Geographic,     FeatureGroup::Geographic,     FeatureGroup::Temporal,
    FeatureGroup::Temporal,       FeatureGroup::Temporal,       FeatureGroup::Atmospheric,
    FeatureGroup::Atmospheric,    FeatureGroup::Atmospheric,    FeatureGroup::Meteorological,
    FeatureGroup::Meteorological, FeatureGroup::Meteorological, FeatureGroup::Meteorological,
    FeatureGroup::Meteorological, FeatureGroup::Meteorological, FeatureGroup::Demographic};

// Coordinates and the harmattan flag are passed through unscaled; z-scoring
// them inside a single location-year would zero them out.
inline constexpr bool is_standardized_column(int col) {
    return col != 0 && col != 1 && col != 4;
}

/// Cyclical month encoding: (sin(2*pi*m/12), cos(2*pi*m/12)).
inline std::pair<double, double> encode_month(int month) {
    if (month < 1 || month > 12) throw ContractError("encode_month: month out of range");
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(month) / 12.0;
    return {std::sin(angle), std::cos(angle)};
}

/// 1 during the West African dry season (November through March).
inline int harmattan_flag(int month) {
    if (month < 1 || month > 12) throw ContractError("harmattan_flag: month out of range");
    return (month >= 11 || month <= 3) ? 1 : 0;
}

/// Row-major numeric matrix aligned 1:1 with the source dataset rows.
struct FeatureMatrix {
    std::vector<double> data;  // n_rows * n_cols, row-major
    std::size_t n_rows = 0;
    std::size_t n_cols = kNumFeatures;
    std::vector<std::string> column_names;
    std::vector<FeatureGroup> column_groups;

    double at(std::size_t row, std::size_t col) const { return data[row * n_cols + col]; }
    double& at(std::size_t row, std::size_t col) { return data[row * n_cols + col]; }
    const double* row(std::size_t r) const { return data.data() + r * n_cols; }

    /// Copy with the given columns removed (used by group ablation).
    FeatureMatrix without_columns(const std::vector<std::size_t>& drop) const {
        std::vector<bool> dropped(n_cols, false);
        for (auto c : drop) dropped[c] = true;
        FeatureMatrix out;
        out.n_rows = n_rows;
        out.n_cols = 0;
        for (std::size_t c = 0; c < n_cols; ++c)
            if (!dropped[c]) {
                ++out.n_cols;
                out.column_names.push_back(column_names[c]);
                out.column_groups.push_back(column_groups[c]);
            }
        out.data.reserve(out.n_rows * out.n_cols);
        for (std::size_t r = 0; r < n_rows; ++r)
            for (std::size_t c = 0; c < n_cols; ++c)
                if (!dropped[c]) out.data.push_back(at(r, c));
        return out;
    }

    std::vector<std::size_t> columns_of_group(FeatureGroup g) const {
        std::vector<std::size_t> cols;
        for (std::size_t c = 0; c < n_cols; ++c)
            if (column_groups[c] == g) cols.push_back(c);
        return cols;
    }

    /// Copy holding only the given rows, in the given order.
    FeatureMatrix rows_subset(const std::vector<std::size_t>& rows) const {
        FeatureMatrix out;
        out.n_rows = rows.size();
        out.n_cols = n_cols;
        out.column_names = column_names;
        out.column_groups = column_groups;
        out.data.reserve(rows.size() * n_cols);
        for (auto r : rows)
            out.data.insert(out.data.end(), data.begin() + static_cast<std::ptrdiff_t>(r * n_cols),
                            data.begin() + static_cast<std::ptrdiff_t>((r + 1) * n_cols));
        return out;
    }
};

/// Grouping key for standardisation: all rows of one location in one year.
struct GroupKey {
    std::string location_id;
    int year = 0;

    auto operator<=>(const GroupKey&) const = default;
};

/// Z-scores each standardised column within each (location, year) group,
/// using the group mean and population standard deviation. Zero-variance
/// and single-row groups map to 0. Statistics never cross locations, so no
/// information can leak between spatial folds.
inline void standardize_by_group(FeatureMatrix& m, const std::vector<GroupKey>& keys) {
    if (keys.size() != m.n_rows)
        throw ContractError("standardize_by_group: key/row count mismatch");

    std::map<GroupKey, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < m.n_rows; ++r) groups[keys[r]].push_back(r);

    for (const auto& [key, rows] : groups) {
        for (std::size_t c = 0; c < m.n_cols; ++c) {
            if (!is_standardized_column(static_cast<int>(c))) continue;
            double sum = 0.0;
            for (auto r : rows) sum += m.at(r, c);
            const double mean = sum / static_cast<double>(rows.size());
            double ss = 0.0;
            for (auto r : rows) {
                const double d = m.at(r, c) - mean;
                ss += d * d;
            }
            const double sd = std::sqrt(ss / static_cast<double>(rows.size()));
            for (auto r : rows) m.at(r, c) = sd > 0.0 ? (m.at(r, c) - mean) / sd : 0.0;
        }
    }
}

// standardize_by_group is defined for the full 15-column layout; callers
// ablate columns afterwards.
inline FeatureMatrix build_features(const Dataset& ds) {
    FeatureMatrix m;
    m.n_rows = ds.size();
    m.n_cols = kNumFeatures;
    m.column_names.assign(kFeatureNames.begin(), kFeatureNames.end());
    m.column_groups.assign(kFeatureGroupTags.begin(), kFeatureGroupTags.end());
    m.data.resize(m.n_rows * m.n_cols);

    std::vector<GroupKey> keys;
    keys.reserve(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const Observation& o = ds[r];
        const auto [msin, mcos] = encode_month(o.timestamp.month);
        double* row = m.data.data() + r * m.n_cols;
        row[0] = o.latitude;
        row[1] = o.longitude;
        row[2] = msin;
        row[3] = mcos;
        row[4] = static_cast<double>(harmattan_flag(o.timestamp.month));
        for (int p = 0; p < kNumPredictors; ++p)
            row[5 + p] = o.predictors[static_cast<std::size_t>(p)];
        keys.push_back({o.location_id, o.timestamp.year});
    }
    standardize_by_group(m, keys);
    return m;
}

}  // namespace geoconform
