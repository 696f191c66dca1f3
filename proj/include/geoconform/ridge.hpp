#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "geoconform/datamodel.hpp"
#include "geoconform/features.hpp"

namespace geoconform {

namespace detail {

/// Gaussian elimination with partial pivoting. Near-zero pivot columns get
/// coefficient 0, which yields the minimum-effort pseudo-solution for the
/// degenerate alpha = 0 cases.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b,
                                        std::size_t n) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    const double tol = (scale > 0.0 ? scale : 1.0) * 1e-12;

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::vector<bool> dead(n, false);

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[perm[i] * n + k]) > std::abs(a[perm[piv] * n + k])) piv = i;
        std::swap(perm[k], perm[piv]);
        const double pivot = a[perm[k] * n + k];
        if (std::abs(pivot) <= tol) {
            dead[k] = true;
            continue;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a[perm[i] * n + k] / pivot;
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) a[perm[i] * n + j] -= f * a[perm[k] * n + j];
            b[perm[i]] -= f * b[perm[k]];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t kk = n; kk-- > 0;) {
        if (dead[kk]) continue;
        double s = b[perm[kk]];
        for (std::size_t j = kk + 1; j < n; ++j) s -= a[perm[kk] * n + j] * x[j];
        x[kk] = s / (a[perm[kk] * n + kk]);
    }
    return x;
}

}  // namespace detail

struct RidgeModel {
    std::vector<double> coefficients;
    double intercept = 0.0;
    double alpha = 1.0;
    std::vector<std::string> feature_names;
    std::size_t train_rows = 0;

    double predict_row(const double* row) const {
        double v = intercept;
        for (std::size_t j = 0; j < coefficients.size(); ++j) v += coefficients[j] * row[j];
        return v;
    }

    bool operator==(const RidgeModel&) const = default;
};

/// Ridge regression with an unpenalised intercept: centre the features and
/// the target, solve (Xc'Xc + alpha*I) b = Xc'yc, then intercept =
/// mean(y) - mean(x)'b. Unique for alpha > 0.
inline RidgeModel train_ridge(const FeatureMatrix& x, const std::vector<double>& y,
                              double alpha = 1.0) {
    if (x.n_rows != y.size()) throw ContractError("train_ridge: row/target length mismatch");
    if (x.n_rows == 0) throw ContractError("train_ridge: empty training set");
    if (!(alpha >= 0.0)) throw ContractError("train_ridge: alpha must be >= 0");

    const std::size_t n = x.n_rows;
    const std::size_t m = x.n_cols;

    std::vector<double> xmean(m, 0.0);
    double ymean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ymean += y[i];
        const double* row = x.row(i);
        for (std::size_t j = 0; j < m; ++j) xmean[j] += row[j];
    }
    ymean /= static_cast<double>(n);
    for (auto& v : xmean) v /= static_cast<double>(n);

    // Normal equations on centred data.
    std::vector<double> gram(m * m, 0.0);
    std::vector<double> rhs(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.row(i);
        const double yc = y[i] - ymean;
        for (std::size_t j = 0; j < m; ++j) {
            const double xj = row[j] - xmean[j];
            rhs[j] += xj * yc;
            for (std::size_t k = j; k < m; ++k) gram[j * m + k] += xj * (row[k] - xmean[k]);
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        gram[j * m + j] += alpha;
        for (std::size_t k = j + 1; k < m; ++k) gram[k * m + j] = gram[j * m + k];
    }

    RidgeModel model;
    model.coefficients = detail::solve_linear(std::move(gram), std::move(rhs), m);
    model.alpha = alpha;
    model.intercept = ymean;
    for (std::size_t j = 0; j < m; ++j) model.intercept -= model.coefficients[j] * xmean[j];
    model.feature_names = x.column_names;
    model.train_rows = n;
    return model;
}

}  // namespace geoconform
