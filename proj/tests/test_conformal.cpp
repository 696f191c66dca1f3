#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "geoconform/conformal.hpp"
#include "geoconform/rng.hpp"
#include "oracles.hpp"
#include "protocol.hpp"

using namespace geoconform;

TEST_CASE("calibrate picks the split-conformal order statistic") {
    const Calibrator c1 = calibrate({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.1);
    CHECK(c1.pooled.sufficient);
    CHECK(c1.pooled.q_hat == 10.0);  // k = ceil(11 * 0.9) = 10

    const Calibrator c2 = calibrate({3, 1, 2}, 0.5);
    CHECK(c2.pooled.q_hat == 2.0);  // k = ceil(4 * 0.5) = 2

    const Calibrator c3 = calibrate({1, 2, 3}, 0.1);  // k = 4 > n
    CHECK_FALSE(c3.pooled.sufficient);
    CHECK(std::isinf(c3.pooled.q_hat));

    CHECK_THROWS_AS(calibrate({}, 0.1), ContractError);
    CHECK_THROWS_AS(calibrate({1.0}, 0.0), ContractError);
    CHECK_THROWS_AS(calibrate({-0.5}, 0.1), ContractError);
}

TEST_CASE("calibrate matches the brute-force rule across n and alpha") {
    rng::Engine eng(606);
    for (std::size_t n = 1; n <= 60; ++n) {
        std::vector<double> scores(n);
        for (auto& s : scores) s = std::abs(eng.normal(0.0, 5.0));
        for (double alpha : {0.01, 0.05, 0.1, 0.25, 0.5}) {
            const Calibrator c = calibrate(scores, alpha);
            const auto oracle = oracles::conformal_quantile(scores, alpha);
            CHECK(c.pooled.sufficient == oracle.sufficient);
            if (oracle.sufficient) CHECK(c.pooled.q_hat == oracle.q_hat);
        }
    }
}

TEST_CASE("q_hat is non-decreasing in the coverage level") {
    rng::Engine eng(13);
    std::vector<double> scores(150);
    for (auto& s : scores) s = std::abs(eng.normal());
    double prev = 0.0;
    for (double level = 0.5; level < 0.99; level += 0.02) {
        const Calibrator c = calibrate(scores, 1.0 - level);
        if (!c.pooled.sufficient) break;
        CHECK(c.pooled.q_hat >= prev);
        prev = c.pooled.q_hat;
    }
}

TEST_CASE("permuting calibration residuals leaves q_hat unchanged") {
    rng::Engine eng(14);
    std::vector<double> scores(97);
    for (auto& s : scores) s = std::abs(eng.normal(0.0, 3.0));
    const double q = calibrate(scores, 0.1).pooled.q_hat;
    for (int shuffle = 0; shuffle < 10; ++shuffle) {
        eng.shuffle(scores);
        CHECK(calibrate(scores, 0.1).pooled.q_hat == q);
    }
}

TEST_CASE("interval construction is symmetric and never clamped") {
    const Calibrator c = calibrate(std::vector<double>(99, 10.0), 0.1);
    const auto mid = predict_interval(c, 50.0, Subregion::West);
    CHECK(mid.lower == 40.0);
    CHECK(mid.upper == 60.0);
    CHECK(mid.width() == Catch::Approx(2.0 * mid.q_hat));

    const auto low = predict_interval(c, 5.0, Subregion::West);
    CHECK(low.lower == -5.0);  // physically impossible values stay visible
    CHECK(low.upper == 15.0);
}

TEST_CASE("per-region mode requires a pool and surfaces insufficiency") {
    std::vector<double> residuals(300, 1.0);
    std::vector<Subregion> regions(300, Subregion::West);
    // a tiny region pool that cannot support alpha = 0.1
    for (int i = 0; i < 3; ++i) regions[static_cast<std::size_t>(i)] = Subregion::East;
    const Calibrator c = calibrate(residuals, regions, 0.1, CalibrationMode::PerRegion);

    CHECK_THROWS_AS(predict_interval(c, 50.0, Subregion::North), MissingPoolError);

    const auto east = predict_interval(c, 50.0, Subregion::East);
    CHECK(east.infinite());
    CHECK(east.covers(-1e9));
    const auto west = predict_interval(c, 50.0, Subregion::West);
    CHECK_FALSE(west.infinite());
}

TEST_CASE("picp hand examples") {
    auto make_iv = [](double lo, double hi) {
        IntervalPrediction iv;
        iv.point = (lo + hi) / 2.0;
        iv.lower = lo;
        iv.upper = hi;
        iv.q_hat = (hi - lo) / 2.0;
        return iv;
    };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<IntervalPrediction> all_inf(4, make_iv(-inf, inf));
    for (auto& iv : all_inf) iv.q_hat = inf;
    CHECK(picp(all_inf, {1, 2, 3, 4}) == 1.0);

    std::vector<IntervalPrediction> band(4, make_iv(1.5, 3.5));
    CHECK(picp(band, {1, 2, 3, 4}) == 0.5);

    std::vector<IntervalPrediction> points = {make_iv(2, 2), make_iv(7, 7)};
    CHECK(picp(points, {2, 7}) == 1.0);  // closed interval

    CHECK_THROWS_AS(picp(band, {1.0}), ContractError);
}

TEST_CASE("mpiw averages finite widths and counts infinite ones") {
    auto make_iv = [](double width) {
        IntervalPrediction iv;
        iv.lower = -width / 2.0;
        iv.upper = width / 2.0;
        iv.q_hat = width / 2.0;
        return iv;
    };
    std::vector<IntervalPrediction> ivs = {make_iv(10), make_iv(30)};
    CHECK(mpiw(ivs).mean_width == Catch::Approx(20.0));

    auto inf_iv = make_iv(1);
    inf_iv.q_hat = std::numeric_limits<double>::infinity();
    ivs.push_back(inf_iv);
    const auto res = mpiw(ivs);
    CHECK(res.mean_width == Catch::Approx(20.0));
    CHECK(res.infinite_count == 1);

    std::vector<IntervalPrediction> all_inf(3, inf_iv);
    CHECK_THROWS_AS(mpiw(all_inf), ContractError);
    CHECK_THROWS_AS(mpiw({}), ContractError);
}

TEST_CASE("pooled split conformal yields constant-width intervals (MPIW = 2 q_hat)") {
    rng::Engine eng(70);
    std::vector<double> residuals(500);
    for (auto& r : residuals) r = std::abs(eng.normal(0.0, 4.0));
    const Calibrator c = calibrate(residuals, 0.1);
    std::vector<IntervalPrediction> ivs;
    for (int i = 0; i < 200; ++i)
        ivs.push_back(predict_interval(c, eng.uniform(10.0, 90.0), Subregion::Central));
    CHECK(mpiw(ivs).mean_width == Catch::Approx(2.0 * c.pooled.q_hat).margin(1e-12));
}

TEST_CASE("regional coverage partitions the rows") {
    synth::SynthConfig cfg;
    cfg.locations_per_subregion = 8;
    cfg.records_per_location = 60;
    cfg.seed = 501;
    cfg.response = synth::ResponseKind::NonlinearInteraction;
    const auto run = protocol::run_coverage(cfg, ModelKind::Ridge);
    std::size_t total = 0;
    for (const auto& [region, stats] : run.pooled.regions) total += stats.n;
    CHECK(total == run.pooled.overall.n);
    CHECK(total == run.n_test);
    for (const auto& [region, stats] : run.pooled.regions) {
        CHECK(stats.picp >= 0.75);  // single-seed sanity band
        CHECK(stats.picp <= 1.0);
    }
}

TEST_CASE("marginal coverage respects the finite-sample band across 100 seeds") {
    int in_band = 0;
    double mean_picp = 0.0;
    std::size_t n_test_seen = 0;
    for (int seed = 0; seed < 100; ++seed) {
        synth::SynthConfig cfg;
        cfg.locations_per_subregion = 8;
        cfg.records_per_location = 60;
        cfg.seed = 52000 + static_cast<std::uint64_t>(seed);
        cfg.response = synth::ResponseKind::NonlinearInteraction;
        const auto run = protocol::run_coverage(cfg, ModelKind::Ridge);
        n_test_seen = run.n_test;
        const double band =
            0.9 - 2.0 * std::sqrt(0.1 * 0.9 / static_cast<double>(run.n_test));
        in_band += run.pooled.overall.picp >= band;
        mean_picp += run.pooled.overall.picp;
    }
    INFO("mean PICP " << mean_picp / 100.0 << " at n_test " << n_test_seen);
    CHECK(in_band >= 90);
}

TEST_CASE("per-region calibration repairs a shifted region (single-seed sanity)") {
    synth::SynthConfig cfg;
    cfg.locations_per_subregion = 20;
    cfg.records_per_location = 100;
    cfg.seed = 61001;
    cfg.response = synth::ResponseKind::NonlinearInteraction;
    cfg.set_shift(Subregion::East, "humidity", 2.0);
    cfg.set_shift(Subregion::East, "sat_pblh", 2.0);
    const auto run = protocol::run_coverage(cfg, ModelKind::Gbt);
    const double east_pooled = run.pooled.regions.at(Subregion::East).picp;
    const double east_mond = run.per_region.regions.at(Subregion::East).picp;
    CHECK(east_mond > east_pooled);
    CHECK(east_mond >= 0.82);  // loose single-seed bound; the 50-seed bound is stricter
}

TEST_CASE("calibration_split is stratified, sized, and deterministic") {
    synth::SynthConfig cfg;
    cfg.locations_per_subregion = 10;
    cfg.records_per_location = 5;
    cfg.seed = 3;
    const Dataset ds = synth::generate(cfg);
    std::vector<std::string> all_locs;
    for (const auto& [loc, rows] : ds.by_location()) all_locs.push_back(loc);

    const auto [proper, cal] = calibration_split(ds, all_locs, 0.2, 77);
    CHECK(proper.size() + cal.size() == all_locs.size());
    CHECK(cal.size() == 10);  // 2 per region
    std::array<int, kNumSubregions> cal_regions{};
    for (const auto& loc : cal)
        ++cal_regions[static_cast<std::size_t>(ds[ds.by_location().at(loc).front()].subregion)];
    for (int c : cal_regions) CHECK(c == 2);

    const auto again = calibration_split(ds, all_locs, 0.2, 77);
    CHECK(again.first == proper);
    CHECK(again.second == cal);
    const auto other_seed = calibration_split(ds, all_locs, 0.2, 78);
    CHECK(other_seed.second != cal);

    CHECK_THROWS_AS(calibration_split(ds, all_locs, 0.0, 1), ContractError);
}
