#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "geoconform/datamodel.hpp"
#include "geoconform/features.hpp"
#include "geoconform/models.hpp"
#include "geoconform/parallel.hpp"
#include "geoconform/rng.hpp"

namespace geoconform {

// ---------------------------------------------------------------------------
// Fold construction
// ---------------------------------------------------------------------------

/// Assignment of every dataset row to exactly one test fold. Spatial plans
/// additionally group by location so no station straddles folds.
struct FoldPlan {
    int k = 5;
    std::uint64_t seed = 0;
    bool location_grouped = true;
    std::map<std::string, int> fold_of_location;  // empty for row-level plans
    std::vector<int> fold_of_row;

    std::vector<std::size_t> test_rows(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t r = 0; r < fold_of_row.size(); ++r)
            if (fold_of_row[r] == fold) out.push_back(r);
        return out;
    }

    std::vector<std::size_t> train_rows(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t r = 0; r < fold_of_row.size(); ++r)
            if (fold_of_row[r] != fold) out.push_back(r);
        return out;
    }
};

/// Location-grouped spatial folds, stratified by sub-region. Within each
/// sub-region, locations are visited by record count descending (ties by
/// id) and each goes to the fold with the fewest locations of that
/// sub-region so far, record load then fold index breaking ties. This keeps
/// per-region location counts balanced within +/-1 while also levelling
/// record totals. The assignment itself is deterministic; the seed is
/// recorded for provenance.
inline FoldPlan make_spatial_folds(const Dataset& ds, int k = 5, std::uint64_t seed = 0) {
    if (k < 2) throw ContractError("make_spatial_folds: k must be >= 2");
    if (ds.num_locations() < static_cast<std::size_t>(k))
        throw DataError("make_spatial_folds: fewer locations than folds");

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.location_grouped = true;

    std::vector<std::size_t> fold_records(static_cast<std::size_t>(k), 0);
    for (Subregion region : kAllSubregions) {
        struct Loc {
            std::string id;
            std::size_t records;
        };
        std::vector<Loc> locs;
        for (const auto& [id, rows] : ds.by_location())
            if (ds[rows.front()].subregion == region) locs.push_back({id, rows.size()});
        std::sort(locs.begin(), locs.end(), [](const Loc& a, const Loc& b) {
            return a.records != b.records ? a.records > b.records : a.id < b.id;
        });

        std::vector<std::size_t> fold_locs(static_cast<std::size_t>(k), 0);
        for (const auto& loc : locs) {
            int best = 0;
            for (int f = 1; f < k; ++f) {
                const auto fu = static_cast<std::size_t>(f);
                const auto bu = static_cast<std::size_t>(best);
                if (fold_locs[fu] < fold_locs[bu] ||
                    (fold_locs[fu] == fold_locs[bu] && fold_records[fu] < fold_records[bu]))
                    best = f;
            }
            plan.fold_of_location[loc.id] = best;
            ++fold_locs[static_cast<std::size_t>(best)];
            fold_records[static_cast<std::size_t>(best)] += loc.records;
        }
    }

    plan.fold_of_row.resize(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r)
        plan.fold_of_row[r] = plan.fold_of_location.at(ds[r].location_id);
    return plan;
}

/// Uniform row-level k-fold (the leakage-prone baseline protocol).
inline FoldPlan make_random_folds(const Dataset& ds, int k, std::uint64_t seed) {
    if (k < 2) throw ContractError("make_random_folds: k must be >= 2");
    if (static_cast<std::size_t>(k) > ds.size())
        throw DataError("make_random_folds: more folds than rows");

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.location_grouped = false;
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0u);
    rng::Engine eng(rng::mix(seed, 0xf01d5ULL));
    eng.shuffle(order);
    plan.fold_of_row.resize(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        plan.fold_of_row[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    return plan;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline double rmse(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size() || y.empty()) throw ContractError("rmse: bad lengths");
    double ss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(y.size()));
}

inline double mae(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size() || y.empty()) throw ContractError("mae: bad lengths");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
    return s / static_cast<double>(y.size());
}

/// R^2 = 1 - SS_res/SS_tot, with SS_tot taken about the evaluation set's
/// own mean. Requires var(y) > 0.
inline double r2(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size() || y.empty()) throw ContractError("r2: bad lengths");
    const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - ybar) * (y[i] - ybar);
    }
    if (!(ss_tot > 0.0)) throw ContractError("r2: constant truth vector");
    return 1.0 - ss_res / ss_tot;
}

inline double accuracy(const std::vector<AqiBin>& y, const std::vector<AqiBin>& yhat) {
    if (y.size() != yhat.size() || y.empty()) throw ContractError("accuracy: bad lengths");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hits += y[i] == yhat[i];
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

/// Unweighted mean of per-class F1 over classes present in truth or
/// prediction; absent classes are excluded, classes with no true positive
/// contribute 0.
inline double macro_f1(const std::vector<AqiBin>& y, const std::vector<AqiBin>& yhat) {
    if (y.size() != yhat.size() || y.empty()) throw ContractError("macro_f1: bad lengths");
    std::array<std::size_t, kNumAqiBins> tp{}, fp{}, fn{};
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto t = static_cast<std::size_t>(y[i]);
        const auto p = static_cast<std::size_t>(yhat[i]);
        if (t == p)
            ++tp[t];
        else {
            ++fn[t];
            ++fp[p];
        }
    }
    double sum = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < kNumAqiBins; ++c) {
        if (tp[c] + fp[c] + fn[c] == 0) continue;
        ++classes;
        const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
        sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
    }
    if (classes == 0) throw ContractError("macro_f1: no classes present");
    return sum / static_cast<double>(classes);
}

/// Bins a point prediction, flooring at a tiny positive value since models
/// may emit non-positive estimates.
inline AqiBin bin_prediction(double yhat) { return aqi_bin(std::max(yhat, 1e-9)); }

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct FoldMetrics {
    double rmse = 0.0;
    double mae = 0.0;
    double r2 = 0.0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::size_t n_test = 0;
};

/// Per-fold metrics plus the mean +/- population std summary and, labelled
/// separately, metrics over the pooled out-of-fold vector.
struct CvResult {
    std::vector<FoldMetrics> folds;
    FoldMetrics mean;
    FoldMetrics stddev;
    FoldMetrics pooled;
    std::vector<double> oof;  // one out-of-fold prediction per dataset row
};

namespace detail {

inline FoldMetrics compute_metrics(const std::vector<double>& y,
                                   const std::vector<double>& yhat) {
    FoldMetrics m;
    m.n_test = y.size();
    m.rmse = rmse(y, yhat);
    m.mae = mae(y, yhat);
    m.r2 = r2(y, yhat);
    std::vector<AqiBin> yb, pb;
    yb.reserve(y.size());
    pb.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        yb.push_back(aqi_bin(y[i]));
        pb.push_back(bin_prediction(yhat[i]));
    }
    m.accuracy = accuracy(yb, pb);
    m.macro_f1 = macro_f1(yb, pb);
    return m;
}

template <typename Get>
inline std::pair<double, double> mean_std(const std::vector<FoldMetrics>& folds, Get get) {
    double mean = 0.0;
    for (const auto& f : folds) mean += get(f);
    mean /= static_cast<double>(folds.size());
    double var = 0.0;
    for (const auto& f : folds) var += (get(f) - mean) * (get(f) - mean);
    var /= static_cast<double>(folds.size());
    return {mean, std::sqrt(var)};
}

}  // namespace detail

/// Fits and scores one model under the given fold plan. Folds run in
/// parallel up to the thread cap; outputs are merged by fold index so the
/// result is independent of scheduling. Training failures are rethrown
/// annotated with their fold.
inline CvResult run_cv(const Dataset& ds, const FeatureMatrix& x, const ModelSpec& spec,
                       const FoldPlan& plan) {
    if (plan.fold_of_row.size() != ds.size())
        throw ContractError("run_cv: plan does not cover the dataset");

    CvResult result;
    result.folds.resize(static_cast<std::size_t>(plan.k));
    result.oof.assign(ds.size(), 0.0);

    std::vector<std::string> fold_errors(static_cast<std::size_t>(plan.k));
    parallel_for_index(static_cast<std::size_t>(plan.k), thread_cap(), [&](std::size_t f) {
        try {
            const auto fold = static_cast<int>(f);
            const auto train = plan.train_rows(fold);
            const auto test = plan.test_rows(fold);
            if (train.empty() || test.empty())
                throw DataError("empty train or test split");
            const TrainedModel model = train_model(spec, ds, x, train);
            const auto yhat = predict(model, ds, x, test);
            const auto y = gather_targets(ds, test);
            result.folds[f] = detail::compute_metrics(y, yhat);
            for (std::size_t i = 0; i < test.size(); ++i) result.oof[test[i]] = yhat[i];
        } catch (const std::exception& e) {
            fold_errors[f] = e.what();
        }
    });
    for (std::size_t f = 0; f < fold_errors.size(); ++f)
        if (!fold_errors[f].empty())
            throw DataError("fold " + std::to_string(f) + ": " + fold_errors[f]);

    auto fill = [&](auto get, double FoldMetrics::*mean_field, double FoldMetrics::*std_field) {
        const auto [m, s] = detail::mean_std(result.folds, get);
        result.mean.*mean_field = m;
        result.stddev.*std_field = s;
    };
    fill([](const FoldMetrics& f) { return f.rmse; }, &FoldMetrics::rmse, &FoldMetrics::rmse);
    fill([](const FoldMetrics& f) { return f.mae; }, &FoldMetrics::mae, &FoldMetrics::mae);
    fill([](const FoldMetrics& f) { return f.r2; }, &FoldMetrics::r2, &FoldMetrics::r2);
    fill([](const FoldMetrics& f) { return f.accuracy; }, &FoldMetrics::accuracy,
         &FoldMetrics::accuracy);
    fill([](const FoldMetrics& f) { return f.macro_f1; }, &FoldMetrics::macro_f1,
         &FoldMetrics::macro_f1);
    for (const auto& f : result.folds) result.mean.n_test += f.n_test;

    result.pooled = detail::compute_metrics(gather_targets(ds, [&] {
                                                std::vector<std::size_t> all(ds.size());
                                                std::iota(all.begin(), all.end(), 0u);
                                                return all;
                                            }()),
                                            result.oof);
    return result;
}

// ---------------------------------------------------------------------------
// Feature-group ablation
// ---------------------------------------------------------------------------

struct AblationResult {
    double full_rmse = 0.0;  // fold-mean RMSE of the full model
    std::map<FeatureGroup, double> delta_rmse;
};

/// Reruns CV once per feature group with that group's columns withheld;
/// delta = RMSE_without - RMSE_full, under the identical plan.
inline AblationResult ablate_groups(const Dataset& ds, const FeatureMatrix& x,
                                    const ModelSpec& spec, const FoldPlan& plan) {
    std::size_t active_groups = 0;
    for (FeatureGroup g : kAllFeatureGroups)
        active_groups += !x.columns_of_group(g).empty();
    if (active_groups < 2) throw ContractError("ablate_groups: need at least 2 feature groups");

    AblationResult out;
    out.full_rmse = run_cv(ds, x, spec, plan).mean.rmse;
    for (FeatureGroup g : kAllFeatureGroups) {
        const auto cols = x.columns_of_group(g);
        if (cols.empty()) continue;
        const FeatureMatrix reduced = x.without_columns(cols);
        out.delta_rmse[g] = run_cv(ds, reduced, spec, plan).mean.rmse - out.full_rmse;
    }
    return out;
}

}  // namespace geoconform
