#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geoconform/conformal.hpp"
#include "geoconform/datamodel.hpp"
#include "geoconform/evaluation.hpp"
#include "geoconform/features.hpp"
#include "geoconform/models.hpp"
#include "geoconform/policy.hpp"
#include "geoconform/shift.hpp"

#include <json.hpp>

namespace geoconform {

struct PipelineOptions {
    int folds = 5;
    double alpha = 0.1;
    std::uint64_t seed = 1;
    bool spatial_cv = true;
    CalibrationMode conformal_mode = CalibrationMode::Pooled;
    ModelKind conformal_model = ModelKind::Gbt;
    std::vector<ModelKind> models = {ModelKind::SeasonalNaive, ModelKind::Ridge,
                                     ModelKind::Gbt};
    double ridge_alpha = 1.0;
    GbtConfig gbt;
    double calibration_fraction = 0.2;

    void validate() const {
        if (folds < 2) throw ConfigError("folds must be >= 2");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
        if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0))
            throw ConfigError("calibration_fraction must be in (0,1)");
        if (models.empty()) throw ConfigError("at least one model required");
        try {
            gbt.validate();
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        if (!(ridge_alpha >= 0.0)) throw ConfigError("ridge_alpha must be >= 0");
    }

    ModelSpec spec_for(ModelKind kind, std::uint64_t gbt_seed) const {
        ModelSpec spec;
        spec.kind = kind;
        spec.ridge_alpha = ridge_alpha;
        spec.gbt = gbt;
        spec.gbt.seed = gbt_seed;
        return spec;
    }
};

struct RegionPolicyRow {
    double r2 = 0.0;          // out-of-fold, conformal model
    double rmse = 0.0;
    double half_width = 0.0;  // regional MPIW / 2
    ReliabilityFlag flag = ReliabilityFlag::Unreliable;
    std::array<double, 4> histogram{};
    std::size_t n_locations = 0;
};

struct PipelineResult {
    // evaluation
    FoldPlan plan;
    std::map<ModelKind, CvResult> cv;

    // conformal (for options.conformal_model)
    std::vector<IntervalPrediction> intervals;  // out-of-fold, aligned to rows
    RegionalCoverage coverage;
    std::vector<double> fold_q_hat;  // pooled q per fold

    // shift diagnostics: each region vs its complement
    std::map<Subregion, ShiftReport> shift;

    // policy
    std::map<Subregion, RegionPolicyRow> policy;
    std::vector<LocationFlagInput> location_stats;
    std::vector<RankedSite> ranking;
};

namespace detail {

inline std::vector<std::size_t> rows_of_locations(const Dataset& ds,
                                                  const std::vector<std::string>& locs) {
    std::vector<std::size_t> out;
    for (const auto& l : locs) {
        const auto& rows = ds.by_location().at(l);
        out.insert(out.end(), rows.begin(), rows.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Calibration split for one fold's training rows. Spatial plans split by
// location (region-stratified); row-level plans split rows directly.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> fold_calibration_split(
    const Dataset& ds, const FoldPlan& plan, int fold, double cal_fraction,
    std::uint64_t seed) {
    const auto train = plan.train_rows(fold);
    if (plan.location_grouped) {
        std::vector<std::string> train_locs;
        for (const auto& [loc, f] : plan.fold_of_location)
            if (f != fold) train_locs.push_back(loc);
        auto [proper_locs, cal_locs] = calibration_split(ds, train_locs, cal_fraction, seed);
        return {rows_of_locations(ds, proper_locs), rows_of_locations(ds, cal_locs)};
    }
    std::vector<std::size_t> shuffled = train;
    rng::Engine eng(rng::mix(seed, 0x0ca1ULL));
    eng.shuffle(shuffled);
    const auto n_cal = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cal_fraction *
                                                 static_cast<double>(shuffled.size()))));
    std::vector<std::size_t> cal(shuffled.begin(),
                                 shuffled.begin() + static_cast<std::ptrdiff_t>(n_cal));
    std::vector<std::size_t> proper(shuffled.begin() + static_cast<std::ptrdiff_t>(n_cal),
                                    shuffled.end());
    std::sort(cal.begin(), cal.end());
    std::sort(proper.begin(), proper.end());
    return {std::move(proper), std::move(cal)};
}

}  // namespace detail

/// Full evaluation stack on an audited dataset: spatial (or random) CV for
/// every requested model, split-conformal intervals for the chosen model
/// with a per-fold location-grouped calibration split, regional coverage
/// and KS shift diagnostics, reliability flags and monitor ranking.
inline PipelineResult run_pipeline(const Dataset& ds, const PipelineOptions& options) {
    options.validate();
    if (ds.empty()) throw DataError("pipeline: empty dataset");

    PipelineResult result;
    const FeatureMatrix features = build_features(ds);
    result.plan = options.spatial_cv ? make_spatial_folds(ds, options.folds, options.seed)
                                     : make_random_folds(ds, options.folds, options.seed);

    // --- point-prediction CV for every model ---
    for (ModelKind kind : options.models) {
        const ModelSpec spec = options.spec_for(kind, rng::mix(options.seed, 0x6b7ULL));
        result.cv[kind] = run_cv(ds, features, spec, result.plan);
    }

    // --- conformal stage (per fold: 80/20 calibration inside the training side) ---
    result.intervals.assign(ds.size(), {});
    result.fold_q_hat.assign(static_cast<std::size_t>(options.folds), 0.0);
    std::vector<std::string> fold_errors(static_cast<std::size_t>(options.folds));
    parallel_for_index(static_cast<std::size_t>(options.folds), thread_cap(), [&](std::size_t f) {
        try {
            const int fold = static_cast<int>(f);
            const std::uint64_t fold_seed = rng::mix(options.seed, 0xf0ULL + f);
            auto [proper, cal] = detail::fold_calibration_split(
                ds, result.plan, fold, options.calibration_fraction, fold_seed);
            if (proper.empty() || cal.empty()) throw DataError("degenerate calibration split");

            const ModelSpec spec = options.spec_for(options.conformal_model, fold_seed);
            const TrainedModel model = train_model(spec, ds, features, proper);

            const auto cal_pred = predict(model, ds, features, cal);
            std::vector<double> residuals;
            std::vector<Subregion> cal_regions;
            residuals.reserve(cal.size());
            cal_regions.reserve(cal.size());
            for (std::size_t i = 0; i < cal.size(); ++i) {
                residuals.push_back(std::abs(ds[cal[i]].pm25 - cal_pred[i]));
                cal_regions.push_back(ds[cal[i]].subregion);
            }
            const Calibrator calibrator =
                calibrate(residuals, cal_regions, options.alpha, options.conformal_mode);
            result.fold_q_hat[f] = calibrator.pooled.q_hat;

            const auto test = result.plan.test_rows(fold);
            const auto test_pred = predict(model, ds, features, test);
            for (std::size_t i = 0; i < test.size(); ++i)
                result.intervals[test[i]] =
                    predict_interval(calibrator, test_pred[i], ds[test[i]].subregion);
        } catch (const std::exception& e) {
            fold_errors[f] = e.what();
        }
    });
    for (std::size_t f = 0; f < fold_errors.size(); ++f)
        if (!fold_errors[f].empty())
            throw DataError("conformal fold " + std::to_string(f) + ": " + fold_errors[f]);

    result.coverage = regional_coverage(ds, result.intervals);

    // --- shift diagnostics: each region vs the pooled complement ---
    const auto feature_list = all_predictor_names();
    for (Subregion region : kAllSubregions) {
        const auto& region_rows = ds.rows_of_region(region);
        if (region_rows.empty()) continue;
        std::vector<std::size_t> complement;
        complement.reserve(ds.size() - region_rows.size());
        for (std::size_t r = 0; r < ds.size(); ++r)
            if (ds[r].subregion != region) complement.push_back(r);
        if (complement.empty()) continue;
        result.shift.emplace(region, shift_report(ds, complement, region_rows, feature_list));
    }

    // --- policy: regional flags, per-location histograms, site ranking ---
    const CvResult& conformal_cv = result.cv.count(options.conformal_model)
                                       ? result.cv.at(options.conformal_model)
                                       : result.cv.begin()->second;
    std::map<Subregion, RegionFlagInput> region_inputs;
    for (const auto& [region, stats] : result.coverage.regions) {
        const auto& rows = ds.rows_of_region(region);
        std::vector<double> y, yhat;
        y.reserve(rows.size());
        yhat.reserve(rows.size());
        for (auto r : rows) {
            y.push_back(ds[r].pm25);
            yhat.push_back(conformal_cv.oof[r]);
        }
        RegionPolicyRow row;
        row.r2 = r2(y, yhat);
        row.rmse = rmse(y, yhat);
        row.half_width = stats.mpiw / 2.0;
        result.policy[region] = row;
        region_inputs[region] = {row.r2, row.half_width};
    }

    std::vector<CandidateSite> sites;
    for (const auto& [loc, rows] : ds.by_location()) {
        LocationFlagInput in;
        in.location_id = loc;
        in.subregion = ds[rows.front()].subregion;
        in.n_rows = rows.size();
        double width_sum = 0.0;
        std::size_t width_n = 0;
        double pop_sum = 0.0;
        std::vector<double> y, yhat;
        for (auto r : rows) {
            y.push_back(ds[r].pm25);
            yhat.push_back(conformal_cv.oof[r]);
            pop_sum += ds[r].predictor("population_density");
            const auto& iv = result.intervals[r];
            if (!iv.infinite()) {
                width_sum += iv.width() / 2.0;
                ++width_n;
            }
        }
        in.half_width = width_n > 0 ? width_sum / static_cast<double>(width_n)
                                    : std::numeric_limits<double>::infinity();
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= static_cast<double>(y.size());
        double var = 0.0;
        for (double v : y) var += (v - mean) * (v - mean);
        if (in.n_rows >= 10 && var > 0.0) {
            in.r2 = r2(y, yhat);
        } else {
            in.n_rows = 0;  // forces the Unreliable bucket downstream
        }
        result.location_stats.push_back(in);
        sites.push_back({loc, std::isfinite(in.half_width) ? in.half_width : 0.0,
                         pop_sum / static_cast<double>(rows.size())});
    }
    const auto flags = flag_regions(region_inputs, result.location_stats);
    for (const auto& [region, rf] : flags) {
        auto& row = result.policy[region];
        row.flag = rf.flag;
        row.histogram = rf.histogram;
        row.n_locations = rf.n_locations;
    }
    result.ranking = rank_sites(sites);
    return result;
}

// ---------------------------------------------------------------------------
// Run-config file (optional --config for the run command)
// ---------------------------------------------------------------------------

inline void apply_run_config(PipelineOptions& options, const nlohmann::json& j) {
    try {
        static const std::array<std::string_view, 6> known = {
            "models", "conformal_model", "ridge_alpha", "gbt", "calibration_fraction",
            "conformal_mode"};
        for (const auto& [key, _] : j.items()) {
            bool ok = false;
            for (auto k : known) ok = ok || k == key;
            if (!ok) throw ConfigError("unknown run-config key: " + key);
        }
        if (j.contains("models")) {
            options.models.clear();
            for (const auto& name : j.at("models")) {
                const auto kind = parse_model_kind(name.get<std::string>());
                if (!kind) throw ConfigError("unknown model kind in config");
                options.models.push_back(*kind);
            }
        }
        if (j.contains("conformal_model")) {
            const auto kind = parse_model_kind(j.at("conformal_model").get<std::string>());
            if (!kind) throw ConfigError("unknown conformal_model");
            options.conformal_model = *kind;
        }
        if (j.contains("ridge_alpha")) options.ridge_alpha = j.at("ridge_alpha").get<double>();
        if (j.contains("calibration_fraction"))
            options.calibration_fraction = j.at("calibration_fraction").get<double>();
        if (j.contains("conformal_mode")) {
            const auto mode = j.at("conformal_mode").get<std::string>();
            if (mode == "pooled")
                options.conformal_mode = CalibrationMode::Pooled;
            else if (mode == "per-region" || mode == "per_region")
                options.conformal_mode = CalibrationMode::PerRegion;
            else
                throw ConfigError("unknown conformal_mode");
        }
        if (j.contains("gbt")) {
            const auto& g = j.at("gbt");
            if (g.contains("n_estimators")) options.gbt.n_estimators = g.at("n_estimators").get<int>();
            if (g.contains("max_depth")) options.gbt.max_depth = g.at("max_depth").get<int>();
            if (g.contains("learning_rate"))
                options.gbt.learning_rate = g.at("learning_rate").get<double>();
            if (g.contains("feature_fraction"))
                options.gbt.feature_fraction = g.at("feature_fraction").get<double>();
            if (g.contains("min_samples_leaf"))
                options.gbt.min_samples_leaf = g.at("min_samples_leaf").get<int>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad run config: ") + e.what());
    }
    options.validate();
}

}  // namespace geoconform
