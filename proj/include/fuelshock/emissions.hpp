#pragma once

#include "fuelshock/csv.hpp"
#include "fuelshock/io_util.hpp"
#include "fuelshock/panel.hpp"
#include "fuelshock/types.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace fuelshock {

/// Emission activity per pollutant and class, a_ki * q_i, its totals
/// psi_k = sum_i a_ki q_i, and the normalized weights used to average demand
/// elasticities into emission elasticities. Activity q_i is fleet
/// kilometers/year so that g/km x km/yr is grams/yr.
struct EmissionWeights {
    std::vector<std::string> classes;
    Eigen::MatrixXd activity; // kPollutantCount x N, grams/year
    Eigen::VectorXd totals;   // kPollutantCount, psi_k
    Eigen::MatrixXd weights;  // kPollutantCount x N, rows sum to 1
};

/// Activity is km/year per class by default; a liters/year vector may be
/// passed instead for sensitivity runs (the factors are per-km, so that
/// variant is a deliberate approximation and is labeled by the caller).
inline EmissionWeights emission_weights(const FleetParams& fleet, const Eigen::VectorXd& activity)
{
    const int n = static_cast<int>(fleet.entries.size());
    if (activity.size() != n)
        throw ValidationError("emission_weights: activity vector length mismatch");
    if (activity.minCoeff() < 0.0)
        throw ValidationError("emission_weights: negative activity");

    EmissionWeights w;
    w.activity.resize(kPollutantCount, n);
    w.totals.resize(kPollutantCount);
    w.weights.resize(kPollutantCount, n);
    for (const auto& e : fleet.entries) w.classes.push_back(e.vehicle.id);

    for (Pollutant p : all_pollutants()) {
        const int k = index_of(p);
        for (int i = 0; i < n; ++i)
            w.activity(k, i) =
                fleet.entries[i].emission_factor_g_per_km[k] * activity(i);
        w.totals(k) = w.activity.row(k).sum();
        if (!(w.totals(k) > 0.0))
            throw ValidationError(std::string("emission_weights: zero total activity for ") +
                                  to_string(p));
        w.weights.row(k) = w.activity.row(k) / w.totals(k);
    }
    return w;
}

enum class ActivityBasis { FleetKilometers, FuelLiters };

/// Mean per-class activity from a derived panel: vehicle kilometers by
/// default, fuel liters under the alternative basis.
inline Eigen::VectorXd mean_activity(const FuelPanel& panel,
                                     ActivityBasis basis = ActivityBasis::FleetKilometers)
{
    if (!panel.derived)
        throw ValidationError("mean_activity: panel has no derived quantities");
    const int n = static_cast<int>(panel.classes.size());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(n);
    for (const auto& r : panel.rows) {
        const int c = panel.class_index(r.vehicle_class);
        sum(c) += basis == ActivityBasis::FleetKilometers ? r.vehicle_population * r.vmt
                                                          : r.quantity;
        count(c) += 1.0;
    }
    return (sum.array() / count.array()).matrix();
}

// ---------------------------------------------------------------------------
// Emission elasticities
// ---------------------------------------------------------------------------

/// pi_kj = sum_i (a_ki q_i / psi_k) e_ij: the emission-weighted average over
/// goods of their elasticities with respect to price j, one column per
/// shocked price.
inline Eigen::MatrixXd emission_price_elasticities(const Eigen::MatrixXd& demand_elasticities,
                                                   const EmissionWeights& w)
{
    const int n = static_cast<int>(w.classes.size());
    if (demand_elasticities.rows() != n || demand_elasticities.cols() != n)
        throw ValidationError("emission_price_elasticities: dimension mismatch");
    return w.weights * demand_elasticities; // (K x N) * (N x N)
}

/// eta_k = sum_i (a_ki q_i / psi_k) e_i
inline Eigen::VectorXd emission_expenditure_elasticity(const Eigen::VectorXd& exp_elasticities,
                                                       const EmissionWeights& w)
{
    if (exp_elasticities.size() != static_cast<int>(w.classes.size()))
        throw ValidationError("emission_expenditure_elasticity: dimension mismatch");
    return w.weights * exp_elasticities;
}

struct EmissionElasticityTable {
    std::vector<std::string> classes;
    std::vector<Fuel> fuels;        // price group of each class
    Eigen::MatrixXd price;          // kPollutantCount x N, pi_kj
    Eigen::VectorXd expenditure;    // kPollutantCount, eta_k

    int n_classes() const { return static_cast<int>(classes.size()); }

    void validate() const
    {
        if (fuels.size() != classes.size())
            throw ValidationError("emission elasticity table: fuel column missing");
        if (price.rows() != kPollutantCount || price.cols() != n_classes())
            throw ValidationError("emission elasticity table: bad price matrix shape");
        if (!price.allFinite())
            throw ValidationError("emission elasticity table: non-finite entries");
    }
};

inline std::string emission_table_to_csv(const EmissionElasticityTable& t)
{
    std::string out = "class,fuel,CO,NOx,PM2.5\n";
    for (int j = 0; j < t.n_classes(); ++j) {
        out += t.classes[j];
        out += ',';
        out += to_string(t.fuels[j]);
        for (Pollutant p : all_pollutants())
            out += ',' + format_double(t.price(index_of(p), j));
        out += '\n';
    }
    return out;
}

/// Read a pi table from the documented CSV schema
/// (class,fuel,CO,NOx,PM2.5; one row per vehicle class).
inline EmissionElasticityTable load_emission_price_elasticities(const std::filesystem::path& path)
{
    const std::string ctx = "emission elasticity file " + path.string();
    if (!std::filesystem::exists(path))
        throw ValidationError(ctx + ": file does not exist");
    csv::Table t = csv::parse(read_file(path), ctx);
    const int c_class = t.require_column("class", ctx);
    const int c_fuel = t.require_column("fuel", ctx);
    std::array<int, kPollutantCount> c_pol{};
    for (Pollutant p : all_pollutants())
        c_pol[index_of(p)] = t.require_column(to_string(p), ctx);

    EmissionElasticityTable out;
    const int n = static_cast<int>(t.rows.size());
    if (n == 0) throw ValidationError(ctx + ": no data rows");
    out.price.resize(kPollutantCount, n);
    out.expenditure = Eigen::VectorXd::Zero(kPollutantCount);
    for (int j = 0; j < n; ++j) {
        out.classes.push_back(t.rows[j][c_class]);
        out.fuels.push_back(fuel_from_string(t.rows[j][c_fuel]));
        for (Pollutant p : all_pollutants())
            out.price(index_of(p), j) =
                csv::to_double(t.rows[j][c_pol[index_of(p)]],
                               ctx + ", row " + std::to_string(j + 1));
    }
    out.validate();
    return out;
}

} // namespace fuelshock
