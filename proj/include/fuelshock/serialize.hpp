#pragma once

#include "fuelshock/aids.hpp"
#include "fuelshock/elasticity.hpp"
#include "fuelshock/io_util.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace fuelshock {

namespace detail {

inline nlohmann::ordered_json vector_to_json(const Eigen::VectorXd& v)
{
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m)
{
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& a, const std::string& ctx)
{
    if (!a.is_array()) throw ValidationError(ctx + ": expected array");
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
    return v;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& a, const std::string& ctx)
{
    if (!a.is_array() || a.empty()) throw ValidationError(ctx + ": expected array of rows");
    const std::size_t cols = a[0].size();
    Eigen::MatrixXd m(a.size(), cols);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != cols) throw ValidationError(ctx + ": ragged matrix");
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = a[i][j].get<double>();
    }
    return m;
}

} // namespace detail

inline std::string fit_to_json(const AidsFit& fit)
{
    nlohmann::ordered_json j;
    j["type"] = "aids_fit";
    j["goods"] = fit.goods;
    j["dropped_equation"] = fit.dropped_good;
    j["index"] = to_string(fit.index);
    j["alpha0"] = fit.params.alpha0; // fixed at 0 by convention, not identified
    j["alpha"] = detail::vector_to_json(fit.params.alpha);
    j["beta"] = detail::vector_to_json(fit.params.beta);
    j["gamma"] = detail::matrix_to_json(fit.params.gamma);
    j["restriction_residual"] = fit.params.restriction_residual();
    j["convergence"] = {{"iterations", fit.iterations},
                        {"final_change", fit.final_change},
                        {"converged", fit.converged}};
    j["free_parameter_names"] = fit.map.names(fit.goods);
    j["free_parameters"] = detail::vector_to_json(fit.free_params);
    j["covariance"] = detail::matrix_to_json(fit.covariance);
    j["residual_covariance"] = detail::matrix_to_json(fit.residual_covariance);
    j["evaluation_point"] = {{"mean_shares", detail::vector_to_json(fit.mean_shares)},
                             {"mean_log_prices", detail::vector_to_json(fit.mean_log_prices)},
                             {"mean_log_expenditure", fit.mean_log_expenditure}};
    return j.dump(2) + "\n";
}

inline AidsFit fit_from_json(const std::string& text, const std::string& ctx = "fit document")
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(ctx + ": " + e.what());
    }
    if (j.value("type", "") != "aids_fit")
        throw ValidationError(ctx + ": not an aids_fit document");

    AidsFit fit;
    fit.goods = j.at("goods").get<std::vector<std::string>>();
    fit.dropped_good = j.at("dropped_equation").get<std::string>();
    const std::string index = j.value("index", "translog");
    fit.index = index == "stone" ? PriceIndex::Stone : PriceIndex::Translog;
    fit.params.alpha0 = j.value("alpha0", 0.0);
    fit.params.alpha = detail::vector_from_json(j.at("alpha"), ctx + " alpha");
    fit.params.beta = detail::vector_from_json(j.at("beta"), ctx + " beta");
    fit.params.gamma = detail::matrix_from_json(j.at("gamma"), ctx + " gamma");
    fit.params.validate(1e-6);

    int dropped = -1;
    for (std::size_t i = 0; i < fit.goods.size(); ++i)
        if (fit.goods[i] == fit.dropped_good) dropped = static_cast<int>(i);
    if (dropped < 0) throw ValidationError(ctx + ": dropped equation not among goods");
    fit.map = FreeParameterMap(static_cast<int>(fit.goods.size()), dropped);
    fit.free_params = detail::vector_from_json(j.at("free_parameters"), ctx);
    fit.covariance = detail::matrix_from_json(j.at("covariance"), ctx + " covariance");
    if (j.contains("residual_covariance"))
        fit.residual_covariance =
            detail::matrix_from_json(j.at("residual_covariance"), ctx + " residual covariance");
    const auto& cv = j.at("convergence");
    fit.iterations = cv.value("iterations", 0);
    fit.final_change = cv.value("final_change", 0.0);
    fit.converged = cv.value("converged", true);
    const auto& ep = j.at("evaluation_point");
    fit.mean_shares = detail::vector_from_json(ep.at("mean_shares"), ctx);
    fit.mean_log_prices = detail::vector_from_json(ep.at("mean_log_prices"), ctx);
    fit.mean_log_expenditure = ep.value("mean_log_expenditure", 0.0);
    return fit;
}

inline std::string double_log_to_csv(const DoubleLogFit& fit)
{
    std::string out =
        "class,intercept,se_intercept,own_price,se_own_price,expenditure,se_expenditure,nobs\n";
    for (const auto& e : fit.equations) {
        out += e.vehicle_class;
        out += ',' + format_double(e.intercept);
        out += ',' + format_double(e.se_intercept);
        out += ',' + format_double(e.own_price);
        out += ',' + format_double(e.se_own_price);
        out += ',' + format_double(e.expenditure);
        out += ',' + format_double(e.se_expenditure);
        out += ',' + std::to_string(e.nobs);
        out += '\n';
    }
    return out;
}

/// Wide matrix layout: one row per good, price-elasticity columns then the
/// expenditure elasticity. Standard errors, when present, use the same
/// layout in a parallel block prefixed with '#se'.
inline std::string elasticity_table_to_csv(const ElasticityTable& t)
{
    const int n = static_cast<int>(t.goods.size());
    std::string out = "good";
    for (const auto& g : t.goods) out += ",e[" + g + "]";
    out += ",expenditure\n";
    for (int i = 0; i < n; ++i) {
        out += t.goods[i];
        for (int j = 0; j < n; ++j) out += ',' + format_double(t.price(i, j));
        out += ',' + format_double(t.expenditure(i));
        out += '\n';
    }
    if (t.price_se.size() > 0) {
        for (int i = 0; i < n; ++i) {
            out += "#se " + t.goods[i];
            for (int j = 0; j < n; ++j) out += ',' + format_double(t.price_se(i, j));
            out += ',' + format_double(t.expenditure_se(i));
            out += '\n';
        }
    }
    return out;
}

inline std::string elasticity_table_to_json(const ElasticityTable& t)
{
    nlohmann::ordered_json j;
    j["type"] = "elasticity_table";
    j["goods"] = t.goods;
    j["price"] = detail::matrix_to_json(t.price);
    j["expenditure"] = detail::vector_to_json(t.expenditure);
    if (t.price_se.size() > 0) {
        j["price_se"] = detail::matrix_to_json(t.price_se);
        j["expenditure_se"] = detail::vector_to_json(t.expenditure_se);
    }
    j["evaluation_point"] = {{"shares", detail::vector_to_json(t.shares)},
                             {"log_prices", detail::vector_to_json(t.log_prices)}};
    return j.dump(2) + "\n";
}

} // namespace fuelshock
