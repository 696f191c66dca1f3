#pragma once

#include <fstream>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "geoconform/datamodel.hpp"
#include "geoconform/features.hpp"
#include "geoconform/gbt.hpp"
#include "geoconform/ridge.hpp"
#include "geoconform/seasonal_naive.hpp"

#include <json.hpp>

namespace geoconform {

enum class ModelKind : int { SeasonalNaive = 0, Ridge = 1, Gbt = 2 };

inline std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::SeasonalNaive: return "seasonal_naive";
        case ModelKind::Ridge: return "ridge";
        case ModelKind::Gbt: return "gbt";
    }
    return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
    if (s == "seasonal_naive") return ModelKind::SeasonalNaive;
    if (s == "ridge") return ModelKind::Ridge;
    if (s == "gbt") return ModelKind::Gbt;
    return std::nullopt;
}

/// What to train: a kind plus its hyperparameters.
struct ModelSpec {
    ModelKind kind = ModelKind::Gbt;
    double ridge_alpha = 1.0;
    GbtConfig gbt;
};

using TrainedModel = std::variant<SeasonalNaiveModel, RidgeModel, GbtModel>;

inline ModelKind kind_of(const TrainedModel& m) {
    return static_cast<ModelKind>(m.index());
}

inline std::vector<double> gather_targets(const Dataset& ds,
                                          const std::vector<std::size_t>& rows) {
    std::vector<double> y;
    y.reserve(rows.size());
    for (auto r : rows) y.push_back(ds[r].pm25);
    return y;
}

/// Trains one model on the given dataset rows. The feature matrix must be
/// row-aligned with the dataset; Seasonal Naive ignores it.
inline TrainedModel train_model(const ModelSpec& spec, const Dataset& ds,
                                const FeatureMatrix& x, const std::vector<std::size_t>& rows) {
    switch (spec.kind) {
        case ModelKind::SeasonalNaive: return train_seasonal_naive(ds, rows);
        case ModelKind::Ridge:
            return train_ridge(x.rows_subset(rows), gather_targets(ds, rows), spec.ridge_alpha);
        case ModelKind::Gbt:
            return train_gbt(x.rows_subset(rows), gather_targets(ds, rows), spec.gbt);
    }
    throw ContractError("train_model: bad kind");
}

namespace detail {

inline void check_contract(const std::vector<std::string>& trained,
                           const std::vector<std::string>& given) {
    if (trained != given)
        throw ContractError("predict: feature columns do not match the model's contract");
}

}  // namespace detail

/// Predicts the given rows. Ridge and GBT consume feature rows and verify
/// the column contract; Seasonal Naive consumes (location, subregion, month).
inline std::vector<double> predict(const TrainedModel& model, const Dataset& ds,
                                   const FeatureMatrix& x,
                                   const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    if (const auto* naive = std::get_if<SeasonalNaiveModel>(&model)) {
        for (auto r : rows) {
            const Observation& o = ds[r];
            out.push_back(naive->predict_one(o.location_id, o.subregion, o.timestamp.month));
        }
        return out;
    }
    if (const auto* ridge = std::get_if<RidgeModel>(&model)) {
        detail::check_contract(ridge->feature_names, x.column_names);
        for (auto r : rows) out.push_back(ridge->predict_row(x.row(r)));
        return out;
    }
    const auto& gbt = std::get<GbtModel>(model);
    detail::check_contract(gbt.feature_names, x.column_names);
    for (auto r : rows) out.push_back(gbt.predict_row(x.row(r)));
    return out;
}

// ---------------------------------------------------------------------------
// Serialisation (format_version 1; JSON keeps doubles round-trip exact)
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json month_array(const std::array<double, 12>& v,
                                  const std::array<bool, 12>& present) {
    nlohmann::json a = nlohmann::json::array();
    for (std::size_t m = 0; m < 12; ++m)
        a.push_back(present[m] ? nlohmann::json(v[m]) : nlohmann::json(nullptr));
    return a;
}

}  // namespace detail

inline nlohmann::json to_json(const TrainedModel& model) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = std::string(to_string(kind_of(model)));
    if (const auto* naive = std::get_if<SeasonalNaiveModel>(&model)) {
        j["global_mean"] = naive->global_mean;
        j["train_rows"] = naive->train_rows;
        nlohmann::json locs = nlohmann::json::object();
        for (const auto& [loc, months] : naive->location_month) {
            std::array<bool, 12> present{};
            for (std::size_t m = 0; m < 12; ++m) present[m] = !std::isnan(months[m]);
            locs[loc] = detail::month_array(months, present);
        }
        j["location_month"] = std::move(locs);
        nlohmann::json regions = nlohmann::json::array();
        for (std::size_t r = 0; r < kNumSubregions; ++r)
            regions.push_back(detail::month_array(naive->region_month[r],
                                                  naive->region_month_present[r]));
        j["region_month"] = std::move(regions);
        j["month"] = detail::month_array(naive->month, naive->month_present);
    } else if (const auto* ridge = std::get_if<RidgeModel>(&model)) {
        j["coefficients"] = ridge->coefficients;
        j["intercept"] = ridge->intercept;
        j["alpha"] = ridge->alpha;
        j["feature_names"] = ridge->feature_names;
        j["train_rows"] = ridge->train_rows;
    } else {
        const auto& gbt = std::get<GbtModel>(model);
        j["base_score"] = gbt.base_score;
        j["learning_rate"] = gbt.config.learning_rate;
        j["n_estimators"] = gbt.config.n_estimators;
        j["max_depth"] = gbt.config.max_depth;
        j["feature_fraction"] = gbt.config.feature_fraction;
        j["min_samples_leaf"] = gbt.config.min_samples_leaf;
        j["seed"] = gbt.config.seed;
        j["feature_names"] = gbt.feature_names;
        j["train_rows"] = gbt.train_rows;
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : gbt.trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : t.nodes)
                nodes.push_back({n.feature, n.threshold, n.value, n.left, n.right});
            trees.push_back(std::move(nodes));
        }
        j["trees"] = std::move(trees);
    }
    return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != 1)
            throw DataError("model file: unsupported format_version");
        const auto kind = parse_model_kind(j.at("kind").get<std::string>());
        if (!kind) throw DataError("model file: unknown kind");
        if (*kind == ModelKind::SeasonalNaive) {
            SeasonalNaiveModel m;
            m.global_mean = j.at("global_mean").get<double>();
            m.train_rows = j.at("train_rows").get<std::size_t>();
            auto read_months = [](const nlohmann::json& a, std::array<double, 12>& v,
                                  std::array<bool, 12>* present) {
                for (std::size_t i = 0; i < 12; ++i) {
                    if (a.at(i).is_null()) {
                        v[i] = std::numeric_limits<double>::quiet_NaN();
                        if (present) (*present)[i] = false;
                    } else {
                        v[i] = a.at(i).get<double>();
                        if (present) (*present)[i] = true;
                    }
                }
            };
            for (const auto& [loc, arr] : j.at("location_month").items())
                read_months(arr, m.location_month[loc], nullptr);
            for (std::size_t r = 0; r < kNumSubregions; ++r)
                read_months(j.at("region_month").at(r), m.region_month[r],
                            &m.region_month_present[r]);
            read_months(j.at("month"), m.month, &m.month_present);
            return m;
        }
        if (*kind == ModelKind::Ridge) {
            RidgeModel m;
            m.coefficients = j.at("coefficients").get<std::vector<double>>();
            m.intercept = j.at("intercept").get<double>();
            m.alpha = j.at("alpha").get<double>();
            m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
            m.train_rows = j.at("train_rows").get<std::size_t>();
            return m;
        }
        GbtModel m;
        m.base_score = j.at("base_score").get<double>();
        m.config.learning_rate = j.at("learning_rate").get<double>();
        m.config.n_estimators = j.at("n_estimators").get<int>();
        m.config.max_depth = j.at("max_depth").get<int>();
        m.config.feature_fraction = j.at("feature_fraction").get<double>();
        m.config.min_samples_leaf = j.at("min_samples_leaf").get<int>();
        m.config.seed = j.at("seed").get<std::uint64_t>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.train_rows = j.at("train_rows").get<std::size_t>();
        for (const auto& tj : j.at("trees")) {
            GbtTree t;
            for (const auto& nj : tj) {
                GbtNode n;
                n.feature = nj.at(0).get<int>();
                n.threshold = nj.at(1).get<double>();
                n.value = nj.at(2).get<double>();
                n.left = nj.at(3).get<int>();
                n.right = nj.at(4).get<int>();
                t.nodes.push_back(n);
            }
            m.trees.push_back(std::move(t));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
}

inline void save_model(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << to_json(model).dump(2) << '\n';
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace geoconform
