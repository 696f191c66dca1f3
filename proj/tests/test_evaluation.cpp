#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <set>

#include "geoconform/evaluation.hpp"
#include "geoconform/rng.hpp"
#include "geoconform/synth.hpp"
#include "oracles.hpp"

using namespace geoconform;

namespace {

// Dataset with explicit location structure; predictors constant so features
// standardise to zero, pm25 given by a callback.
template <typename F>
Dataset structured_dataset(const std::vector<std::pair<Subregion, int>>& regions_and_counts,
                           int records_per_location, F pm25_of, std::uint64_t seed = 1) {
    rng::Engine eng(seed);
    std::vector<Observation> obs;
    int loc_counter = 0;
    for (const auto& [region, n_locs] : regions_and_counts) {
        for (int l = 0; l < n_locs; ++l) {
            Observation proto;
            proto.location_id = "loc-" + std::to_string(loc_counter++);
            proto.country = "synthetic";
            proto.subregion = region;
            proto.latitude = eng.uniform(-30.0, 30.0);
            proto.longitude = eng.uniform(-10.0, 40.0);
            for (auto& p : proto.predictors) p = 1.0;
            for (int k = 0; k < records_per_location; ++k) {
                Observation o = proto;
                o.timestamp = {2020 + (k / 12) % 2, 1 + k % 12, 1 + k % 28, 0, 0, 0};
                o.pm25 = pm25_of(o, k);
                obs.push_back(std::move(o));
            }
        }
    }
    return Dataset(obs);
}

void check_plan_contract(const Dataset& ds, const FoldPlan& plan) {
    // every location in exactly one fold; all records follow their location
    for (const auto& [loc, rows] : ds.by_location()) {
        REQUIRE(plan.fold_of_location.count(loc) == 1);
        const int f = plan.fold_of_location.at(loc);
        CHECK(f >= 0);
        CHECK(f < plan.k);
        for (auto r : rows) CHECK(plan.fold_of_row[r] == f);
    }
    // per-region balance within +/-1
    for (Subregion region : kAllSubregions) {
        std::vector<int> counts(static_cast<std::size_t>(plan.k), 0);
        bool seen = false;
        for (const auto& [loc, rows] : ds.by_location()) {
            if (ds[rows.front()].subregion != region) continue;
            seen = true;
            ++counts[static_cast<std::size_t>(plan.fold_of_location.at(loc))];
        }
        if (!seen) continue;
        const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
        CHECK(*hi - *lo <= 1);
    }
}

}  // namespace

TEST_CASE("spatial folds: 10 locations in one region, k=5 -> 2 per fold") {
    const Dataset ds = structured_dataset({{Subregion::West, 10}}, 6,
                                          [](const Observation&, int) { return 50.0; });
    const FoldPlan plan = make_spatial_folds(ds, 5, 0);
    std::map<int, int> per_fold;
    for (const auto& [loc, f] : plan.fold_of_location) ++per_fold[f];
    for (int f = 0; f < 5; ++f) CHECK(per_fold[f] == 2);
    check_plan_contract(ds, plan);
}

TEST_CASE("spatial folds: 5 regions x 5 locations, k=5 -> one location per region per fold") {
    std::vector<std::pair<Subregion, int>> spec;
    for (Subregion r : kAllSubregions) spec.emplace_back(r, 5);
    const Dataset ds = structured_dataset(spec, 4, [](const Observation&, int) { return 50.0; });
    const FoldPlan plan = make_spatial_folds(ds, 5, 0);
    for (Subregion region : kAllSubregions) {
        std::vector<int> counts(5, 0);
        for (const auto& [loc, f] : plan.fold_of_location)
            if (ds[ds.by_location().at(loc).front()].subregion == region)
                ++counts[static_cast<std::size_t>(f)];
        for (int c : counts) CHECK(c == 1);
    }
}

TEST_CASE("spatial folds satisfy the contract on random structures") {
    rng::Engine eng(8080);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::pair<Subregion, int>> spec;
        int total_locs = 0;
        for (Subregion r : kAllSubregions) {
            const int n = static_cast<int>(eng.below(6));
            if (n > 0) {
                spec.emplace_back(r, n);
                total_locs += n;
            }
        }
        const int k = 2 + static_cast<int>(eng.below(4));
        if (total_locs < k) continue;
        const Dataset ds = structured_dataset(
            spec, 2 + static_cast<int>(eng.below(8)),
            [&](const Observation&, int) { return 50.0; }, 100 + static_cast<unsigned>(trial));
        const FoldPlan plan = make_spatial_folds(ds, k, static_cast<unsigned>(trial));
        check_plan_contract(ds, plan);
        // disjoint train/test unions
        for (int f = 0; f < k; ++f) {
            const auto train = plan.train_rows(f);
            const auto test = plan.test_rows(f);
            CHECK(train.size() + test.size() == ds.size());
        }
    }
}

TEST_CASE("spatial folds refuse fewer locations than folds") {
    const Dataset ds = structured_dataset({{Subregion::West, 3}}, 5,
                                          [](const Observation&, int) { return 50.0; });
    CHECK_THROWS_AS(make_spatial_folds(ds, 5, 0), DataError);
    CHECK_THROWS_AS(make_spatial_folds(ds, 1, 0), ContractError);
}

TEST_CASE("random folds: leave-one-out, balance, and seed determinism") {
    const Dataset ds = structured_dataset({{Subregion::East, 2}}, 6,
                                          [](const Observation&, int k) { return 40.0 + k; });
    const auto loo = make_random_folds(ds, static_cast<int>(ds.size()), 3);
    std::set<int> folds(loo.fold_of_row.begin(), loo.fold_of_row.end());
    CHECK(folds.size() == ds.size());

    const auto a = make_random_folds(ds, 5, 11);
    const auto b = make_random_folds(ds, 5, 11);
    CHECK(a.fold_of_row == b.fold_of_row);
    std::map<int, int> sizes;
    for (int f : a.fold_of_row) ++sizes[f];
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end(),
                                              [](auto& x, auto& y) { return x.second < y.second; });
    CHECK(hi->second - lo->second <= 1);

    CHECK_THROWS_AS(make_random_folds(ds, static_cast<int>(ds.size()) + 1, 0), DataError);
}

TEST_CASE("regression metric hand examples") {
    CHECK(rmse({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(mae({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(r2({1, 2, 3}, {1, 2, 3}) == 1.0);

    CHECK(rmse({0, 2}, {1, 1}) == Catch::Approx(1.0));
    CHECK(mae({0, 2}, {1, 1}) == Catch::Approx(1.0));
    CHECK(r2({0, 2}, {1, 1}) == Catch::Approx(0.0).margin(1e-15));

    // predicting the mean gives exactly zero R^2
    CHECK(r2({1, 2, 3, 10}, {4, 4, 4, 4}) == Catch::Approx(0.0).margin(1e-15));

    CHECK_THROWS_AS(rmse({1}, {1, 2}), ContractError);
    CHECK_THROWS_AS(r2({5, 5, 5}, {1, 2, 3}), ContractError);
}

TEST_CASE("classification metric hand examples") {
    using B = AqiBin;
    const std::vector<B> truth = {B::Good, B::Good, B::Moderate, B::Moderate};
    const std::vector<B> pred = {B::Good, B::Moderate, B::Moderate, B::Moderate};
    CHECK(accuracy(truth, pred) == Catch::Approx(0.75));
    CHECK(macro_f1(truth, pred) == Catch::Approx(11.0 / 15.0));

    // all six classes, all correct
    std::vector<B> all = {B::Good, B::Moderate, B::Usg, B::Unhealthy, B::VeryUnhealthy,
                          B::Hazardous};
    CHECK(macro_f1(all, all) == 1.0);
    CHECK(accuracy(all, all) == 1.0);

    // complete miss scores zero for both classes involved
    const std::vector<B> good(4, B::Good);
    const std::vector<B> haz(4, B::Hazardous);
    CHECK(macro_f1(good, haz) == 0.0);
}

TEST_CASE("metrics match naive reference implementations") {
    rng::Engine eng(777);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + eng.below(50);
        std::vector<double> y(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = eng.uniform(1.0, 400.0);
            p[i] = y[i] + eng.normal(0.0, 20.0);
        }
        CHECK(rmse(y, p) == Catch::Approx(oracles::rmse_naive(y, p)).margin(1e-10));
        CHECK(mae(y, p) == Catch::Approx(oracles::mae_naive(y, p)).margin(1e-10));
        if (n >= 3) CHECK(r2(y, p) == Catch::Approx(oracles::r2_naive(y, p)).margin(1e-10));

        std::vector<AqiBin> yb, pb;
        std::vector<int> yi, pi;
        for (std::size_t i = 0; i < n; ++i) {
            yb.push_back(aqi_bin(y[i]));
            pb.push_back(bin_prediction(p[i]));
            yi.push_back(static_cast<int>(yb.back()));
            pi.push_back(static_cast<int>(pb.back()));
        }
        CHECK(accuracy(yb, pb) == Catch::Approx(oracles::accuracy_naive(yi, pi)).margin(1e-12));
        CHECK(macro_f1(yb, pb) ==
              Catch::Approx(oracles::macro_f1_naive(yi, pi, kNumAqiBins)).margin(1e-12));
    }
}

TEST_CASE("run_cv with an exactly learnable target is perfect in every fold") {
    // pm25 is a pure function of latitude, which passes through the feature
    // pipeline unscaled, so alpha-0 ridge interpolates exactly.
    std::vector<std::pair<Subregion, int>> spec;
    for (Subregion r : kAllSubregions) spec.emplace_back(r, 5);
    const Dataset ds = structured_dataset(
        spec, 24, [](const Observation& o, int) { return 100.0 + 2.0 * o.latitude; });
    const FeatureMatrix x = build_features(ds);
    ModelSpec ridge_spec{ModelKind::Ridge};
    ridge_spec.ridge_alpha = 0.0;
    const CvResult cv = run_cv(ds, x, ridge_spec, make_spatial_folds(ds, 5, 0));
    for (const auto& fold : cv.folds) {
        CHECK(fold.rmse < 1e-6);
        CHECK(fold.r2 > 1.0 - 1e-9);
        CHECK(fold.accuracy == 1.0);
        CHECK(fold.macro_f1 == 1.0);
    }
}

TEST_CASE("run_cv of an uninformative model has near-zero R2 at n = 5000") {
    rng::Engine noise(4242);
    const Dataset ds = structured_dataset(
        {{Subregion::West, 10}}, 500,
        [&](const Observation&, int) { return noise.uniform(40.0, 60.0); });
    REQUIRE(ds.size() == 5000);
    const FeatureMatrix x = build_features(ds);
    const CvResult cv = run_cv(ds, x, ModelSpec{ModelKind::Ridge}, make_random_folds(ds, 5, 9));
    CHECK(std::abs(cv.mean.r2) < 0.02);
    CHECK(std::abs(cv.pooled.r2) < 0.02);
}

TEST_CASE("run_cv emits one out-of-fold prediction per row and a recomputable summary") {
    synth::SynthConfig cfg;
    cfg.locations_per_subregion = 4;
    cfg.records_per_location = 30;
    cfg.seed = 55;
    const Dataset ds = synth::generate(cfg);
    const FeatureMatrix x = build_features(ds);
    const FoldPlan plan = make_spatial_folds(ds, 4, 1);
    const CvResult cv = run_cv(ds, x, ModelSpec{ModelKind::Ridge}, plan);

    CHECK(cv.oof.size() == ds.size());
    for (double v : cv.oof) CHECK(std::isfinite(v));
    std::size_t total = 0;
    for (const auto& f : cv.folds) total += f.n_test;
    CHECK(total == ds.size());

    double mean_rmse = 0.0;
    for (const auto& f : cv.folds) mean_rmse += f.rmse;
    mean_rmse /= static_cast<double>(cv.folds.size());
    CHECK(cv.mean.rmse == Catch::Approx(mean_rmse).margin(1e-12));
}

TEST_CASE("run_cv annotates training failures with the fold index") {
    const Dataset ds = structured_dataset({{Subregion::West, 4}}, 10,
                                          [](const Observation&, int k) { return 40.0 + k; });
    const FeatureMatrix x = build_features(ds);
    ModelSpec spec{ModelKind::Gbt};
    spec.gbt.min_samples_leaf = 1000;  // bigger than any training side
    try {
        run_cv(ds, x, spec, make_spatial_folds(ds, 4, 0));
        FAIL("expected a fold failure");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("fold") != std::string::npos);
    }
}

TEST_CASE("ablation covers every active group and ignores dead columns") {
    // population_density is constant, so its standardised column is all
    // zeros and withholding it cannot change anything (full column set is
    // used on every tree: feature_fraction 1).
    rng::Engine eng(31337);
    const Dataset ds = structured_dataset(
        {{Subregion::West, 6}, {Subregion::East, 6}}, 40,
        [&](const Observation& o, int) { return 60.0 + 1.5 * o.latitude + eng.normal(0.0, 2.0); });
    const FeatureMatrix x = build_features(ds);
    ModelSpec spec{ModelKind::Gbt};
    spec.gbt.n_estimators = 40;
    spec.gbt.feature_fraction = 1.0;
    spec.gbt.seed = 4;
    const FoldPlan plan = make_spatial_folds(ds, 4, 2);
    const AblationResult ab = ablate_groups(ds, x, spec, plan);

    CHECK(ab.delta_rmse.size() == static_cast<std::size_t>(kNumFeatureGroups));
    CHECK(ab.delta_rmse.at(FeatureGroup::Demographic) == Catch::Approx(0.0).margin(1e-12));
    // latitude drives the response, so the geographic group dominates
    for (const auto& [g, d] : ab.delta_rmse)
        if (g != FeatureGroup::Geographic) CHECK(ab.delta_rmse.at(FeatureGroup::Geographic) >= d);
}
