#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "geoconform/pipeline.hpp"
#include "geoconform/svg.hpp"

#include <json.hpp>

namespace geoconform {

inline constexpr int kReportSchemaVersion = 1;

struct RunReport {
    PipelineOptions options;
    std::string data_path;
    AuditSummary audit;
    PipelineResult result;
    std::string generated_at;  // the only field allowed to differ between reruns
};

namespace detail {

inline std::string now_utc_string() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json metrics_json(const FoldMetrics& m, bool with_n) {
    nlohmann::json j{{"rmse", m.rmse},
                     {"mae", m.mae},
                     {"r2", m.r2},
                     {"accuracy", m.accuracy},
                     {"macro_f1", m.macro_f1}};
    if (with_n) j["n_test"] = m.n_test;
    return j;
}

inline nlohmann::json coverage_json(const CoverageStats& s) {
    return {{"picp", s.picp},
            {"mpiw", std::isfinite(s.mpiw) ? nlohmann::json(s.mpiw) : nlohmann::json(nullptr)},
            {"n", s.n},
            {"infinite_intervals", s.infinite_count}};
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline nlohmann::json report_to_json(const RunReport& report, const Dataset& ds) {
    const auto& opt = report.options;
    const auto& res = report.result;
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["generated_at"] = report.generated_at;

    j["config"] = {{"data_path", report.data_path},
                   {"seed", opt.seed},
                   {"folds", opt.folds},
                   {"alpha", opt.alpha},
                   {"cv", opt.spatial_cv ? "spatial" : "random"},
                   {"conformal_mode", std::string(to_string(opt.conformal_mode))},
                   {"conformal_model", std::string(to_string(opt.conformal_model))},
                   {"ridge_alpha", opt.ridge_alpha},
                   {"calibration_fraction", opt.calibration_fraction},
                   {"gbt",
                    {{"n_estimators", opt.gbt.n_estimators},
                     {"max_depth", opt.gbt.max_depth},
                     {"learning_rate", opt.gbt.learning_rate},
                     {"feature_fraction", opt.gbt.feature_fraction},
                     {"min_samples_leaf", opt.gbt.min_samples_leaf}}}};
    nlohmann::json model_names = nlohmann::json::array();
    for (ModelKind m : opt.models) model_names.push_back(std::string(to_string(m)));
    j["config"]["models"] = std::move(model_names);

    j["audit"] = {{"accepted", report.audit.accepted},
                  {"rejected",
                   {{"missing_field", report.audit.missing_field},
                    {"out_of_range", report.audit.out_of_range},
                    {"unparseable", report.audit.unparseable}}}};

    nlohmann::json regions = nlohmann::json::object();
    for (Subregion r : kAllSubregions) {
        const auto& rows = ds.rows_of_region(r);
        if (rows.empty()) continue;
        std::set<std::string> locs;
        for (auto i : rows) locs.insert(ds[i].location_id);
        regions[std::string(to_string(r))] = {{"rows", rows.size()},
                                              {"locations", locs.size()}};
    }
    j["dataset"] = {{"rows", ds.size()}, {"locations", ds.num_locations()},
                    {"regions", std::move(regions)}};

    nlohmann::json models = nlohmann::json::object();
    for (const auto& [kind, cv] : res.cv) {
        nlohmann::json folds = nlohmann::json::array();
        for (std::size_t f = 0; f < cv.folds.size(); ++f) {
            auto fj = detail::metrics_json(cv.folds[f], true);
            fj["fold"] = f;
            folds.push_back(std::move(fj));
        }
        models[std::string(to_string(kind))] = {{"folds", std::move(folds)},
                                                {"mean", detail::metrics_json(cv.mean, false)},
                                                {"std", detail::metrics_json(cv.stddev, false)},
                                                {"pooled", detail::metrics_json(cv.pooled, true)}};
    }
    j["models"] = std::move(models);

    nlohmann::json coverage_regions = nlohmann::json::object();
    for (const auto& [region, stats] : res.coverage.regions)
        coverage_regions[std::string(to_string(region))] = detail::coverage_json(stats);
    j["conformal"] = {{"model", std::string(to_string(opt.conformal_model))},
                      {"alpha", opt.alpha},
                      {"mode", std::string(to_string(opt.conformal_mode))},
                      {"fold_q_hat", res.fold_q_hat},
                      {"overall", detail::coverage_json(res.coverage.overall)},
                      {"regions", std::move(coverage_regions)}};

    nlohmann::json shift = nlohmann::json::object();
    for (const auto& [region, rep] : res.shift) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& e : rep.entries)
            entries.push_back({{"feature", e.feature},
                               {"ks", e.ks},
                               {"severity", std::string(to_string(e.severity))},
                               {"n_region", e.n_test},
                               {"n_complement", e.n_train}});
        shift[std::string(to_string(region))] = std::move(entries);
    }
    j["shift"] = std::move(shift);

    nlohmann::json policy_regions = nlohmann::json::object();
    for (const auto& [region, row] : res.policy) {
        policy_regions[std::string(to_string(region))] = {
            {"r2", row.r2},
            {"rmse", row.rmse},
            {"half_width", row.half_width},
            {"flag", std::string(to_string(row.flag))},
            {"n_locations", row.n_locations},
            {"histogram",
             {{"high", row.histogram[static_cast<std::size_t>(ReliabilityFlag::High)]},
              {"medium", row.histogram[static_cast<std::size_t>(ReliabilityFlag::Medium)]},
              {"low", row.histogram[static_cast<std::size_t>(ReliabilityFlag::Low)]},
              {"unreliable",
               row.histogram[static_cast<std::size_t>(ReliabilityFlag::Unreliable)]}}}};
    }
    nlohmann::json ranking = nlohmann::json::array();
    for (std::size_t i = 0; i < res.ranking.size(); ++i) {
        const auto& s = res.ranking[i];
        ranking.push_back({{"rank", i + 1},
                           {"id", s.id},
                           {"half_width", s.half_width},
                           {"pop_density", s.pop_density},
                           {"score", s.score}});
    }
    j["policy"] = {{"regions", std::move(policy_regions)}, {"ranking", std::move(ranking)}};
    return j;
}

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

inline std::string model_cv_csv(const PipelineResult& res) {
    std::ostringstream out;
    out << "model,fold,rmse,mae,r2,accuracy,macro_f1,n_test\n";
    auto row = [&](std::string_view model, std::string_view fold, const FoldMetrics& m) {
        out << model << ',' << fold << ',' << detail::format_double(m.rmse) << ','
            << detail::format_double(m.mae) << ',' << detail::format_double(m.r2) << ','
            << detail::format_double(m.accuracy) << ',' << detail::format_double(m.macro_f1)
            << ',' << m.n_test << '\n';
    };
    for (const auto& [kind, cv] : res.cv) {
        for (std::size_t f = 0; f < cv.folds.size(); ++f)
            row(to_string(kind), std::to_string(f), cv.folds[f]);
        row(to_string(kind), "mean", cv.mean);
        row(to_string(kind), "std", cv.stddev);
        row(to_string(kind), "pooled", cv.pooled);
    }
    return out.str();
}

inline std::string regional_csv(const PipelineResult& res) {
    std::ostringstream out;
    out << "subregion,n_locations,n_rows,r2,rmse,picp,mpiw,flag\n";
    for (const auto& [region, row] : res.policy) {
        const auto& cov = res.coverage.regions.at(region);
        out << to_string(region) << ',' << row.n_locations << ',' << cov.n << ','
            << detail::format_double(row.r2) << ',' << detail::format_double(row.rmse) << ','
            << detail::format_double(cov.picp) << ','
            << (std::isfinite(cov.mpiw) ? detail::format_double(cov.mpiw) : "inf") << ','
            << to_string(row.flag) << '\n';
    }
    const auto& all = res.coverage.overall;
    out << "overall,," << all.n << ",,," << detail::format_double(all.picp) << ','
        << (std::isfinite(all.mpiw) ? detail::format_double(all.mpiw) : "inf") << ",\n";
    return out.str();
}

inline std::string shift_csv(const PipelineResult& res) {
    std::ostringstream out;
    out << "subregion,feature,ks,severity,n_region,n_complement\n";
    for (const auto& [region, rep] : res.shift)
        for (const auto& e : rep.entries)
            out << to_string(region) << ',' << e.feature << ',' << detail::format_double(e.ks)
                << ',' << to_string(e.severity) << ',' << e.n_test << ',' << e.n_train << '\n';
    return out.str();
}

inline std::string ranking_csv(const std::vector<RankedSite>& ranking) {
    std::ostringstream out;
    out << "rank,id,half_width,pop_density,score\n";
    for (std::size_t i = 0; i < ranking.size(); ++i)
        out << i + 1 << ',' << ranking[i].id << ','
            << detail::format_double(ranking[i].half_width) << ','
            << detail::format_double(ranking[i].pop_density) << ','
            << detail::format_double(ranking[i].score) << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Figures
// ---------------------------------------------------------------------------

/// Out-of-fold predicted vs observed scatter with the identity line.
inline std::string figure_pred_vs_obs(const Dataset& ds, const CvResult& cv) {
    svg::Canvas canvas(520, 520);
    const double m = 60;
    double hi = 1.0;
    for (std::size_t r = 0; r < ds.size(); ++r)
        hi = std::max({hi, ds[r].pm25, cv.oof[r]});
    hi *= 1.05;
    svg::LinearScale sx{0, hi, m, canvas.width() - 20};
    svg::LinearScale sy{0, hi, canvas.height() - m, 20};

    for (double t : svg::nice_ticks(0, hi)) {
        canvas.line(sx(t), canvas.height() - m, sx(t), canvas.height() - m + 5, "black");
        canvas.text(sx(t), canvas.height() - m + 18, std::to_string(static_cast<int>(t)), 10,
                    "middle");
        canvas.line(m - 5, sy(t), m, sy(t), "black");
        canvas.text(m - 8, sy(t) + 4, std::to_string(static_cast<int>(t)), 10, "end");
    }
    canvas.line(m, canvas.height() - m, canvas.width() - 20, canvas.height() - m, "black");
    canvas.line(m, 20, m, canvas.height() - m, "black");
    canvas.text(canvas.width() / 2, canvas.height() - 15, "observed PM2.5 (ug/m3)", 12,
                "middle");
    canvas.text(15, canvas.height() / 2, "predicted", 12, "middle");

    // deterministic thinning keeps the file small on large datasets
    const std::size_t step = std::max<std::size_t>(1, ds.size() / 2000);
    for (std::size_t r = 0; r < ds.size(); r += step)
        canvas.circle(sx(ds[r].pm25), sy(cv.oof[r]), 2.0, "#33547c", 0.55);
    canvas.line(sx(0), sy(0), sx(hi), sy(hi), "#c03a2b", 1.5, true);
    canvas.text(m + 8, 30, "out-of-fold predictions; dashed = perfect", 11);
    return canvas.finish();
}

/// Regional PICP bars with the nominal coverage line.
inline std::string figure_regional_picp(const RegionalCoverage& coverage, double alpha) {
    svg::Canvas canvas(520, 340);
    const double m = 60;
    svg::LinearScale sy{0, 100, canvas.height() - m, 20};
    const double plot_w = canvas.width() - m - 20;
    const double slot = plot_w / static_cast<double>(kNumSubregions);

    for (double t : svg::nice_ticks(0, 100)) {
        canvas.line(m - 5, sy(t), m, sy(t), "black");
        canvas.text(m - 8, sy(t) + 4, std::to_string(static_cast<int>(t)), 10, "end");
    }
    canvas.line(m, canvas.height() - m, canvas.width() - 20, canvas.height() - m, "black");
    canvas.line(m, 20, m, canvas.height() - m, "black");
    canvas.text(15, canvas.height() / 2, "PICP (%)", 12, "middle");

    int i = 0;
    for (Subregion region : kAllSubregions) {
        const double x = m + slot * i + slot * 0.2;
        if (auto it = coverage.regions.find(region); it != coverage.regions.end()) {
            const double picp_pct = it->second.picp * 100.0;
            canvas.rect(x, sy(picp_pct), slot * 0.6, sy(0) - sy(picp_pct), "#4878a8");
            canvas.text(x + slot * 0.3, sy(picp_pct) - 5,
                        std::to_string(static_cast<int>(picp_pct + 0.5)), 10, "middle");
        }
        canvas.text(x + slot * 0.3, canvas.height() - m + 16, std::string(to_string(region)),
                    10, "middle");
        ++i;
    }
    const double nominal = (1.0 - alpha) * 100.0;
    canvas.line(m, sy(nominal), canvas.width() - 20, sy(nominal), "#c03a2b", 1.5, true);
    canvas.text(canvas.width() - 22, sy(nominal) - 5, "nominal", 10, "end");
    return canvas.finish();
}

/// Stacked reliability-flag distribution per region.
inline std::string figure_flag_distribution(const std::map<Subregion, RegionPolicyRow>& policy) {
    svg::Canvas canvas(520, 340);
    const double m = 80;
    const double plot_w = canvas.width() - m - 20;
    const double slot = (canvas.height() - m - 20) / static_cast<double>(kNumSubregions);
    const std::array<ReliabilityFlag, 4> order = {ReliabilityFlag::High, ReliabilityFlag::Medium,
                                                  ReliabilityFlag::Low,
                                                  ReliabilityFlag::Unreliable};
    const std::array<const char*, 4> fill_by_order = {"#27ae60", "#f1c40f", "#e67e22",
                                                      "#c0392b"};

    int i = 0;
    for (Subregion region : kAllSubregions) {
        const double y = 20 + slot * i + slot * 0.2;
        canvas.text(m - 8, y + slot * 0.35, std::string(to_string(region)), 11, "end");
        if (auto it = policy.find(region); it != policy.end()) {
            double x = m;
            for (std::size_t k = 0; k < order.size(); ++k) {
                const double frac =
                    it->second.histogram[static_cast<std::size_t>(order[k])];
                const double w = frac * plot_w;
                if (w > 0.0) canvas.rect(x, y, w, slot * 0.6, fill_by_order[k]);
                x += w;
            }
        }
        ++i;
    }
    double lx = m;
    const std::array<std::string, 4> names = {"high", "medium", "low", "unreliable"};
    for (std::size_t k = 0; k < names.size(); ++k) {
        canvas.rect(lx, canvas.height() - 40, 12, 12, fill_by_order[k]);
        canvas.text(lx + 16, canvas.height() - 30, names[k], 11);
        lx += 110;
    }
    canvas.text(m, canvas.height() - 10, "fraction of locations per reliability flag", 11);
    return canvas.finish();
}

// ---------------------------------------------------------------------------
// Output bundle
// ---------------------------------------------------------------------------

/// Writes report.json, per-table CSVs and the three figures under out_dir.
/// Every file is assembled in memory first and written via rename, so a
/// failed run leaves no partial outputs.
inline void write_report_files(const RunReport& report, const Dataset& ds,
                               const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "tables");
    fs::create_directories(out_dir / "figures");

    const auto& res = report.result;
    std::vector<std::pair<fs::path, std::string>> files;
    files.emplace_back(out_dir / "report.json", report_to_json(report, ds).dump(2) + "\n");
    files.emplace_back(out_dir / "tables" / "model_cv.csv", model_cv_csv(res));
    files.emplace_back(out_dir / "tables" / "regional.csv", regional_csv(res));
    files.emplace_back(out_dir / "tables" / "shift.csv", shift_csv(res));
    files.emplace_back(out_dir / "tables" / "ranking.csv", ranking_csv(res.ranking));
    const auto& conformal_cv = res.cv.count(report.options.conformal_model)
                                   ? res.cv.at(report.options.conformal_model)
                                   : res.cv.begin()->second;
    files.emplace_back(out_dir / "figures" / "pred_vs_obs.svg",
                       figure_pred_vs_obs(ds, conformal_cv));
    files.emplace_back(out_dir / "figures" / "regional_picp.svg",
                       figure_regional_picp(res.coverage, report.options.alpha));
    files.emplace_back(out_dir / "figures" / "flag_distribution.svg",
                       figure_flag_distribution(res.policy));
    for (const auto& [path, content] : files) detail::write_atomic(path, content);
}

}  // namespace geoconform
