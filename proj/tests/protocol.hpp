// Shared simulation protocol for conformal coverage checks: seeded synthetic
// corpus, location-grouped region-stratified train/calibration/test split,
// one model fit, pooled and per-region calibration, regional coverage.
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "geoconform/conformal.hpp"
#include "geoconform/evaluation.hpp"
#include "geoconform/models.hpp"
#include "geoconform/policy.hpp"
#include "geoconform/synth.hpp"

namespace protocol {

using namespace geoconform;

struct SplitRows {
    std::vector<std::size_t> train, cal, test;
};

inline std::vector<std::size_t> rows_of(const Dataset& ds,
                                        const std::vector<std::string>& locs) {
    std::vector<std::size_t> out;
    for (const auto& l : locs) {
        const auto& rr = ds.by_location().at(l);
        out.insert(out.end(), rr.begin(), rr.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline SplitRows grouped_split(const Dataset& ds, std::uint64_t seed, double f_train,
                               double f_cal) {
    std::array<std::vector<std::string>, kNumSubregions> by_region;
    for (const auto& [loc, rr] : ds.by_location())
        by_region[static_cast<std::size_t>(ds[rr.front()].subregion)].push_back(loc);
    std::vector<std::string> train, cal, test;
    for (std::size_t r = 0; r < kNumSubregions; ++r) {
        auto locs = by_region[r];
        std::sort(locs.begin(), locs.end());
        rng::Engine eng(rng::mix(seed, 0x3715ULL + r));
        eng.shuffle(locs);
        const std::size_t n = locs.size();
        const auto n_train = static_cast<std::size_t>(f_train * static_cast<double>(n) + 0.5);
        const auto n_cal = static_cast<std::size_t>(f_cal * static_cast<double>(n) + 0.5);
        for (std::size_t i = 0; i < n; ++i) {
            if (i < n_train)
                train.push_back(locs[i]);
            else if (i < n_train + n_cal)
                cal.push_back(locs[i]);
            else
                test.push_back(locs[i]);
        }
    }
    return {rows_of(ds, train), rows_of(ds, cal), rows_of(ds, test)};
}

struct CoverageRun {
    RegionalCoverage pooled;
    RegionalCoverage per_region;
    std::size_t n_cal = 0;
    std::size_t n_test = 0;
    std::array<std::size_t, kNumSubregions> cal_per_region{};
    std::vector<LocationFlagInput> test_location_stats;  // per-region-mode widths
};

inline CoverageRun run_coverage(const synth::SynthConfig& cfg, ModelKind model_kind,
                                double alpha = 0.1, double f_train = 0.5,
                                double f_cal = 0.25) {
    const Dataset ds = synth::generate(cfg);
    const FeatureMatrix x = build_features(ds);
    const SplitRows sp = grouped_split(ds, cfg.seed, f_train, f_cal);

    ModelSpec spec{model_kind};
    spec.gbt.seed = rng::mix(cfg.seed, 0x90de1ULL);
    const TrainedModel model = train_model(spec, ds, x, sp.train);

    const auto cal_pred = predict(model, ds, x, sp.cal);
    std::vector<double> residuals;
    std::vector<Subregion> cal_regions;
    CoverageRun out;
    for (std::size_t i = 0; i < sp.cal.size(); ++i) {
        residuals.push_back(std::abs(ds[sp.cal[i]].pm25 - cal_pred[i]));
        cal_regions.push_back(ds[sp.cal[i]].subregion);
        ++out.cal_per_region[static_cast<std::size_t>(cal_regions.back())];
    }
    const Calibrator pooled = calibrate(residuals, alpha);
    const Calibrator mondrian = calibrate(residuals, cal_regions, alpha,
                                          CalibrationMode::PerRegion);

    const auto test_pred = predict(model, ds, x, sp.test);
    std::vector<IntervalPrediction> iv_pooled, iv_mond;
    std::vector<Subregion> test_regions;
    std::vector<double> y;
    for (std::size_t i = 0; i < sp.test.size(); ++i) {
        const Subregion region = ds[sp.test[i]].subregion;
        iv_pooled.push_back(predict_interval(pooled, test_pred[i], region));
        iv_mond.push_back(predict_interval(mondrian, test_pred[i], region));
        test_regions.push_back(region);
        y.push_back(ds[sp.test[i]].pm25);
    }
    out.pooled = regional_coverage(test_regions, y, iv_pooled);
    out.per_region = regional_coverage(test_regions, y, iv_mond);
    out.n_cal = sp.cal.size();
    out.n_test = sp.test.size();

    // per-test-location stats for reliability-flag simulations
    std::map<std::string, std::vector<std::size_t>> by_loc;
    for (std::size_t i = 0; i < sp.test.size(); ++i)
        by_loc[ds[sp.test[i]].location_id].push_back(i);
    for (const auto& [loc, idx] : by_loc) {
        LocationFlagInput in;
        in.location_id = loc;
        in.subregion = ds[ds.by_location().at(loc).front()].subregion;
        in.n_rows = idx.size();
        std::vector<double> yy, pp;
        double width = 0.0;
        for (auto i : idx) {
            yy.push_back(y[i]);
            pp.push_back(test_pred[i]);
            width += iv_mond[i].width() / 2.0;
        }
        in.half_width = width / static_cast<double>(idx.size());
        double mean = 0.0;
        for (double v : yy) mean += v;
        mean /= static_cast<double>(yy.size());
        double var = 0.0;
        for (double v : yy) var += (v - mean) * (v - mean);
        in.r2 = var > 0.0 ? r2(yy, pp) : 0.0;
        if (var <= 0.0) in.n_rows = 0;
        out.test_location_stats.push_back(in);
    }
    return out;
}

}  // namespace protocol
