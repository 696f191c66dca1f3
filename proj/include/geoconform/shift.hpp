#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "geoconform/datamodel.hpp"

namespace geoconform {

enum class Severity : int { Low = 0, Medium = 1, High = 2 };

inline std::string_view to_string(Severity s) {
    switch (s) {
        case Severity::Low: return "low";
        case Severity::Medium: return "medium";
        case Severity::High: return "high";
    }
    return "?";
}

/// Exact two-sample Kolmogorov-Smirnov statistic: the sup distance between
/// the empirical CDFs, evaluated at every distinct pooled value so ties are
/// handled exactly.
inline double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw ContractError("ks_statistic: empty sample");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < sa.size() || j < sb.size()) {
        double x;
        if (i >= sa.size())
            x = sb[j];
        else if (j >= sb.size())
            x = sa[i];
        else
            x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// Severity tiers. The Medium/High boundary sits at 0.26 rather than 0.25
/// so the tier labels stay consistent with the diagnostic tables this
/// matches against.
inline Severity severity(double ks) {
    if (!(ks >= 0.0 && ks <= 1.0)) throw ContractError("severity: ks must be in [0,1]");
    if (ks < 0.10) return Severity::Low;
    if (ks < 0.26) return Severity::Medium;
    return Severity::High;
}

struct ShiftEntry {
    std::string feature;
    double ks = 0.0;
    Severity severity = Severity::Low;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

struct ShiftReport {
    std::vector<ShiftEntry> entries;  // one per requested feature, in order

    const ShiftEntry* find(std::string_view feature) const {
        for (const auto& e : entries)
            if (e.feature == feature) return &e;
        return nullptr;
    }
};

namespace detail {

inline std::vector<double> predictor_sample(const Dataset& ds,
                                            const std::vector<std::size_t>& rows, int p) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(ds[r].predictors[static_cast<std::size_t>(p)]);
    return out;
}

}  // namespace detail

/// Per-feature KS diagnostics between two row sets of one dataset,
/// computed on raw (pre-standardisation) predictor values.
inline ShiftReport shift_report(const Dataset& ds, const std::vector<std::size_t>& train_rows,
                                const std::vector<std::size_t>& test_rows,
                                const std::vector<std::string>& features) {
    if (train_rows.empty() || test_rows.empty())
        throw ContractError("shift_report: empty row set");
    ShiftReport report;
    for (const auto& f : features) {
        const int p = predictor_index(f);
        if (p < 0) throw ContractError("shift_report: unknown feature " + f);
        ShiftEntry e;
        e.feature = f;
        const auto a = detail::predictor_sample(ds, train_rows, p);
        const auto b = detail::predictor_sample(ds, test_rows, p);
        e.ks = ks_statistic(a, b);
        e.severity = severity(e.ks);
        e.n_train = a.size();
        e.n_test = b.size();
        report.entries.push_back(std::move(e));
    }
    return report;
}

/// Same diagnostics across two datasets (e.g. a training corpus and a
/// candidate deployment region).
inline ShiftReport shift_report(const Dataset& train, const Dataset& test,
                                const std::vector<std::string>& features) {
    if (train.empty() || test.empty()) throw ContractError("shift_report: empty dataset");
    ShiftReport report;
    for (const auto& f : features) {
        const int p = predictor_index(f);
        if (p < 0) throw ContractError("shift_report: unknown feature " + f);
        std::vector<double> a, b;
        a.reserve(train.size());
        b.reserve(test.size());
        for (const auto& o : train.records()) a.push_back(o.predictors[static_cast<std::size_t>(p)]);
        for (const auto& o : test.records()) b.push_back(o.predictors[static_cast<std::size_t>(p)]);
        ShiftEntry e;
        e.feature = f;
        e.ks = ks_statistic(a, b);
        e.severity = severity(e.ks);
        e.n_train = a.size();
        e.n_test = b.size();
        report.entries.push_back(std::move(e));
    }
    return report;
}

inline std::vector<std::string> all_predictor_names() {
    return {kPredictorNames.begin(), kPredictorNames.end()};
}

}  // namespace geoconform
