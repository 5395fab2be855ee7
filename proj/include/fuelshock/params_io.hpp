#pragma once

#include "fuelshock/io_util.hpp"
#include "fuelshock/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace fuelshock {

/// Everything the impact chain needs besides a panel: fleet constants,
/// pollutant parameters, exposed population and valuation, from one
/// versioned file so runs are reproducible from a single input.
struct ParameterSet {
    int version = 1;
    std::string description;
    FleetParams fleet;
    PollutantTable pollutants;
    PopulationParams population;
    ValuationParams valuation;

    void validate() const
    {
        fleet.validate();
        pollutants.validate();
        population.validate();
        valuation.validate();
    }
};

namespace detail {

inline double require_number(const nlohmann::json& j, const std::string& key,
                             const std::string& ctx)
{
    if (!j.contains(key) || !j.at(key).is_number())
        throw ValidationError(ctx + ": missing or non-numeric key '" + key + "'");
    return j.at(key).get<double>();
}

inline std::string require_string(const nlohmann::json& j, const std::string& key,
                                  const std::string& ctx)
{
    if (!j.contains(key) || !j.at(key).is_string())
        throw ValidationError(ctx + ": missing or non-string key '" + key + "'");
    return j.at(key).get<std::string>();
}

} // namespace detail

inline ParameterSet load_parameters(const std::filesystem::path& path)
{
    const std::string ctx = "parameter file " + path.string();
    if (!std::filesystem::exists(path))
        throw ValidationError(ctx + ": file does not exist");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(ctx + ": " + e.what());
    }

    ParameterSet ps;
    ps.version = j.value("version", 1);
    ps.description = j.value("description", "");

    if (!j.contains("fleet") || !j.at("fleet").is_array())
        throw ValidationError(ctx + ": missing 'fleet' array");
    for (const auto& f : j.at("fleet")) {
        FleetEntry e;
        e.vehicle.id = detail::require_string(f, "id", ctx + " fleet entry");
        e.vehicle.label = f.value("label", e.vehicle.id);
        e.vehicle.fuel = fuel_from_string(detail::require_string(f, "fuel", ctx + " fleet entry"));
        const std::string ectx = ctx + " fleet class " + e.vehicle.id;
        e.baseline_vmt_km = detail::require_number(f, "baseline_vmt_km", ectx);
        e.fuel_economy_l_per_100km = detail::require_number(f, "fuel_economy_l_per_100km", ectx);
        if (!f.contains("emission_factors_g_per_km"))
            throw ValidationError(ectx + ": missing emission factors");
        const auto& ef = f.at("emission_factors_g_per_km");
        for (Pollutant p : all_pollutants())
            e.emission_factor_g_per_km[index_of(p)] =
                detail::require_number(ef, to_string(p), ectx + " emission factors");
        e.source = f.value("source", "");
        ps.fleet.entries.push_back(std::move(e));
    }

    if (!j.contains("pollutants") || !j.at("pollutants").is_array())
        throw ValidationError(ctx + ": missing 'pollutants' array");
    std::array<bool, kPollutantCount> seen{};
    for (const auto& q : j.at("pollutants")) {
        PollutantParams pp;
        pp.pollutant = pollutant_from_string(detail::require_string(q, "pollutant", ctx));
        const std::string pctx = ctx + " pollutant " + to_string(pp.pollutant);
        pp.background_concentration = detail::require_number(q, "background_concentration", pctx);
        pp.baseline_concentration = detail::require_number(q, "baseline_concentration", pctx);
        pp.baseline_emissions_e4t = detail::require_number(q, "baseline_emissions_e4t", pctx);
        pp.er_coefficient_pct = detail::require_number(q, "er_coefficient_pct", pctx);
        pp.source = q.value("source", "");
        ps.pollutants.at(pp.pollutant) = pp;
        seen[index_of(pp.pollutant)] = true;
    }
    for (Pollutant p : all_pollutants())
        if (!seen[index_of(p)])
            throw ValidationError(ctx + ": missing pollutant entry for " +
                                  std::string(to_string(p)));

    if (!j.contains("population"))
        throw ValidationError(ctx + ": missing 'population' object");
    ps.population.exposed_population =
        detail::require_number(j.at("population"), "exposed_population", ctx + " population");
    ps.population.mortality_rate =
        detail::require_number(j.at("population"), "mortality_rate", ctx + " population");

    if (!j.contains("valuation"))
        throw ValidationError(ctx + ": missing 'valuation' object");
    const auto& v = j.at("valuation");
    ps.valuation.vosl_baseline = detail::require_number(v, "vosl_baseline", ctx + " valuation");
    ps.valuation.income_baseline = v.value("income_baseline", 1.0);
    ps.valuation.income = v.value("income", 1.0);
    ps.valuation.wtp_elasticity = v.value("wtp_elasticity", 1.0);
    ps.valuation.source = v.value("source", "");

    ps.validate();
    return ps;
}

} // namespace fuelshock
