#pragma once

#include "fuelshock/aids.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>

namespace fuelshock {

/// Marshallian price elasticities at a point:
///   e_ij = -delta_ij + (gamma_ij - beta_i (alpha_j + sum_m gamma_jm ln p_m)) / w_i
/// The inner sum pairs the price index with gamma's second subscript, which
/// is what differentiating the share equations gives (and what the numeric
/// oracle in the tests checks).
inline Eigen::MatrixXd price_elasticities(const AidsParameters& p, const Eigen::VectorXd& shares,
                                          const Eigen::VectorXd& log_prices)
{
    const int n = p.n();
    if (shares.size() != n || log_prices.size() != n)
        throw ValidationError("price_elasticities: dimension mismatch");
    if (shares.minCoeff() <= 0.0)
        throw ValidationError("price_elasticities: shares must be strictly positive");

    const Eigen::VectorXd price_term = p.alpha + p.gamma * log_prices; // alpha_j + sum_m gamma_jm ln p_m
    Eigen::MatrixXd e(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            e(i, j) = (i == j ? -1.0 : 0.0) +
                      (p.gamma(i, j) - p.beta(i) * price_term(j)) / shares(i);
    return e;
}

/// e_i = 1 + beta_i / w_i
inline Eigen::VectorXd expenditure_elasticities(const AidsParameters& p,
                                                const Eigen::VectorXd& shares)
{
    const int n = p.n();
    if (shares.size() != n)
        throw ValidationError("expenditure_elasticities: dimension mismatch");
    if (shares.minCoeff() <= 0.0)
        throw ValidationError("expenditure_elasticities: shares must be strictly positive");
    return Eigen::VectorXd::Ones(n) + (p.beta.array() / shares.array()).matrix();
}

/// First-order propagation of the fit covariance through an arbitrary
/// function of the parameters: SE = sqrt(diag(J Cov J')), with J the central-
/// difference Jacobian in the free-parameter basis (step 1e-6 * max(1,|theta|)
/// per coordinate).
inline Eigen::VectorXd delta_method_se(
    const AidsFit& fit, const std::function<Eigen::VectorXd(const AidsParameters&)>& target)
{
    if (fit.covariance.rows() != fit.free_params.size() ||
        fit.covariance.cols() != fit.free_params.size())
        throw ValidationError("delta_method_se: fit has no parameter covariance");

    const int k = static_cast<int>(fit.free_params.size());
    const Eigen::VectorXd base = target(fit.params);
    const int m = static_cast<int>(base.size());
    Eigen::MatrixXd jac(m, k);
    for (int l = 0; l < k; ++l) {
        const double h = 1e-6 * std::max(1.0, std::abs(fit.free_params(l)));
        Eigen::VectorXd up = fit.free_params;
        Eigen::VectorXd dn = fit.free_params;
        up(l) += h;
        dn(l) -= h;
        jac.col(l) = (target(fit.params_from_free(up)) - target(fit.params_from_free(dn))) /
                     (2.0 * h);
    }
    if (!jac.allFinite())
        throw EstimationError("delta_method_se: non-finite Jacobian");
    const Eigen::MatrixXd v = jac * fit.covariance * jac.transpose();
    return v.diagonal().cwiseMax(0.0).cwiseSqrt();
}

// ---------------------------------------------------------------------------
// Elasticity table
// ---------------------------------------------------------------------------

struct ElasticityTable {
    std::vector<std::string> goods;
    Eigen::MatrixXd price;          // N x N, e_ij
    Eigen::VectorXd expenditure;    // N
    Eigen::MatrixXd price_se;       // N x N (zero-sized when not computed)
    Eigen::VectorXd expenditure_se; // N
    Eigen::VectorXd shares;         // evaluation point
    Eigen::VectorXd log_prices;

    void validate() const
    {
        const int n = static_cast<int>(goods.size());
        if (price.rows() != n || price.cols() != n || expenditure.size() != n)
            throw ValidationError("elasticity table has inconsistent dimensions");
        if (!price.allFinite() || !expenditure.allFinite())
            throw ValidationError("elasticity table contains non-finite entries");
        if (shares.minCoeff() <= 0.0 || shares.maxCoeff() >= 1.0 ||
            std::abs(shares.sum() - 1.0) > 1e-6)
            throw ValidationError("elasticity evaluation shares must lie in (0,1) and sum to 1");
    }
};

/// Evaluate the full table at a point (defaults to the fit's sample means),
/// with delta-method standard errors unless with_se is false.
inline ElasticityTable elasticity_table(const AidsFit& fit,
                                        std::optional<Eigen::VectorXd> shares = std::nullopt,
                                        std::optional<Eigen::VectorXd> log_prices = std::nullopt,
                                        bool with_se = true)
{
    const Eigen::VectorXd w = shares ? *shares : fit.mean_shares;
    const Eigen::VectorXd lp = log_prices ? *log_prices : fit.mean_log_prices;
    const int n = fit.params.n();

    ElasticityTable t;
    t.goods = fit.goods;
    t.shares = w;
    t.log_prices = lp;
    t.price = price_elasticities(fit.params, w, lp);
    t.expenditure = expenditure_elasticities(fit.params, w);
    if (with_se) {
        const auto stacked = [&](const AidsParameters& p) {
            Eigen::MatrixXd e = price_elasticities(p, w, lp);
            Eigen::VectorXd ee = expenditure_elasticities(p, w);
            Eigen::VectorXd out(n * n + n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) out(i * n + j) = e(i, j);
            out.tail(n) = ee;
            return out;
        };
        const Eigen::VectorXd se = delta_method_se(fit, stacked);
        t.price_se.resize(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) t.price_se(i, j) = se(i * n + j);
        t.expenditure_se = se.tail(n);
    }
    t.validate();
    return t;
}

} // namespace fuelshock
