// geoconform: batch evaluation stack for PM2.5 models -- seeded synthetic
// corpora, location-grouped spatial CV, split-conformal intervals with
// regional coverage diagnostics, KS shift detection, reliability flags and
// monitor prioritisation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoconform/datamodel.hpp"
#include "geoconform/pipeline.hpp"
#include "geoconform/policy.hpp"
#include "geoconform/report.hpp"
#include "geoconform/shift.hpp"
#include "geoconform/synth.hpp"

namespace {

using namespace geoconform;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

// Small header-indexed CSV reader for the policy subcommands.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw DataError("missing column: " + name);
    }
};

CsvTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                cells.emplace_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    if (first) throw DataError(path + ": empty file");
    return table;
}

double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("cannot parse " + what + " value '" + s + "'");
    }
}

void write_text(const std::string& out_path, const std::string& content) {
    if (out_path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + out_path);
    out << content;
}

int cmd_synth(const std::string& config_path, const std::string& out_path,
              const std::optional<std::uint64_t>& seed_override) {
    synth::SynthConfig cfg = synth::load_synth_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    const Dataset ds = synth::generate(cfg);
    save_csv(ds, out_path);
    std::cout << "wrote " << ds.size() << " records from " << ds.num_locations()
              << " locations to " << out_path << "\n";
    return kExitOk;
}

int cmd_run(const std::string& data_path, const std::string& out_dir,
            const std::string& config_path, PipelineOptions options) {
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config " + config_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(config_path + ": " + e.what());
        }
        apply_run_config(options, j);
    }
    options.validate();

    auto [ds, audit] = load_csv(data_path);
    std::cout << "loaded " << audit.accepted << " rows (" << audit.rejected()
              << " rejected) from " << data_path << "\n";
    if (ds.empty()) throw DataError("no rows survived the audit");

    RunReport report;
    report.options = options;
    report.data_path = data_path;
    report.audit = audit;
    report.result = run_pipeline(ds, options);
    report.generated_at = detail::now_utc_string();
    write_report_files(report, ds, out_dir);

    std::cout << "models:";
    for (const auto& [kind, cv] : report.result.cv)
        std::cout << ' ' << to_string(kind) << " rmse=" << cv.mean.rmse;
    std::cout << "\noverall picp=" << report.result.coverage.overall.picp
              << " mpiw=" << report.result.coverage.overall.mpiw << "\n";
    std::cout << "report written to " << out_dir << "/report.json\n";
    return kExitOk;
}

int cmd_shift(const std::string& train_path, const std::string& test_path,
              std::vector<std::string> features, const std::string& out_path) {
    const auto [train, train_audit] = load_csv(train_path);
    const auto [test, test_audit] = load_csv(test_path);
    (void)train_audit;
    (void)test_audit;
    if (train.empty() || test.empty()) throw DataError("empty dataset after audit");
    if (features.empty()) features = all_predictor_names();
    const ShiftReport rep = shift_report(train, test, features);
    std::ostringstream out;
    out << "feature,ks,severity,n_train,n_test\n";
    for (const auto& e : rep.entries)
        out << e.feature << ',' << detail::format_double(e.ks) << ',' << to_string(e.severity)
            << ',' << e.n_train << ',' << e.n_test << '\n';
    write_text(out_path, out.str());
    return kExitOk;
}

int cmd_flags(const std::string& in_path, const std::string& out_path) {
    const CsvTable table = read_table(in_path);
    const int region_col = table.column("subregion");
    const int r2_col = table.column("r2");
    const int mpiw_col = table.column("mpiw");
    std::ostringstream out;
    out << "subregion,r2,half_width,flag\n";
    for (const auto& row : table.rows) {
        const auto& region = row[static_cast<std::size_t>(region_col)];
        const double r2v = parse_number(row[static_cast<std::size_t>(r2_col)], "r2");
        const double mpiw = parse_number(row[static_cast<std::size_t>(mpiw_col)], "mpiw");
        const double half_width = mpiw / 2.0;
        out << region << ',' << detail::format_double(r2v) << ','
            << detail::format_double(half_width) << ','
            << to_string(reliability_flag(r2v, half_width)) << '\n';
    }
    write_text(out_path, out.str());
    return kExitOk;
}

int cmd_prioritize(const std::string& in_path, const std::string& out_path) {
    const CsvTable table = read_table(in_path);
    const int id_col = table.column("id");
    const int width_col = table.column("half_width");
    const int pop_col = table.column("pop_density");
    std::vector<CandidateSite> sites;
    for (const auto& row : table.rows)
        sites.push_back({row[static_cast<std::size_t>(id_col)],
                         parse_number(row[static_cast<std::size_t>(width_col)], "half_width"),
                         parse_number(row[static_cast<std::size_t>(pop_col)], "pop_density")});
    write_text(out_path, ranking_csv(rank_sites(sites)));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trustworthy PM2.5 evaluation stack"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, train_path, test_path, in_path;
    std::string cv_mode = "spatial", conformal_mode = "pooled";
    std::vector<std::string> features;
    std::uint64_t seed = 1;
    bool seed_given = false;
    PipelineOptions options;

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset CSV");
    synth_cmd->add_option("--config", config_path, "synth config JSON")->required();
    synth_cmd->add_option("--out", out_path, "output CSV path")->required();
    synth_cmd->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* run_cmd = app.add_subcommand("run", "run the full evaluation pipeline");
    run_cmd->add_option("--data", data_path, "input dataset CSV")->required();
    run_cmd->add_option("--out", out_path, "output directory")->required();
    run_cmd->add_option("--config", config_path, "optional run config JSON");
    run_cmd->add_option("--seed", options.seed, "master seed");
    run_cmd->add_option("--folds", options.folds, "fold count");
    run_cmd->add_option("--alpha", options.alpha, "miscoverage level");
    run_cmd->add_option("--cv", cv_mode, "cv protocol")->check(CLI::IsMember({"spatial", "random"}));
    run_cmd->add_option("--conformal-mode", conformal_mode, "calibration pooling")
        ->check(CLI::IsMember({"pooled", "per-region"}));

    auto* shift_cmd = app.add_subcommand("shift", "KS covariate-shift diagnostics");
    shift_cmd->add_option("--train", train_path, "training CSV")->required();
    shift_cmd->add_option("--test", test_path, "test CSV")->required();
    shift_cmd->add_option("--features", features, "predictor subset (default: all)");
    shift_cmd->add_option("--out", out_path, "output CSV ('-' = stdout)")->default_val("-");

    auto* flags_cmd = app.add_subcommand("flags", "reliability flags from regional metrics");
    flags_cmd->add_option("--in", in_path, "CSV with subregion,r2,mpiw columns")->required();
    flags_cmd->add_option("--out", out_path, "output CSV ('-' = stdout)")->default_val("-");

    auto* prio_cmd = app.add_subcommand("prioritize", "rank candidate monitor sites");
    prio_cmd->add_option("--in", in_path, "CSV with id,half_width,pop_density columns")
        ->required();
    prio_cmd->add_option("--out", out_path, "output CSV ('-' = stdout)")->default_val("-");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (synth_cmd->parsed())
            return cmd_synth(config_path, out_path,
                             seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt);
        if (run_cmd->parsed()) {
            options.spatial_cv = cv_mode == "spatial";
            options.conformal_mode = conformal_mode == "pooled" ? CalibrationMode::Pooled
                                                                : CalibrationMode::PerRegion;
            return cmd_run(data_path, out_path, config_path, options);
        }
        if (shift_cmd->parsed()) return cmd_shift(train_path, test_path, features, out_path);
        if (flags_cmd->parsed()) return cmd_flags(in_path, out_path);
        if (prio_cmd->parsed()) return cmd_prioritize(in_path, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ContractError& e) {
        std::cerr << "contract error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
