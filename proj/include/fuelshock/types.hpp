#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuelshock {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data or configuration violates a documented schema or invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

/// The regressor matrix is rank deficient (e.g. two goods share one price series).
class CollinearityError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

class ConvergenceError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

// ---------------------------------------------------------------------------
// Fuels and pollutants
// ---------------------------------------------------------------------------

enum class Fuel { Gasoline, Diesel };

inline const char* to_string(Fuel f)
{
    return f == Fuel::Gasoline ? "gasoline" : "diesel";
}

inline Fuel fuel_from_string(const std::string& s)
{
    if (s == "gasoline" || s == "G") return Fuel::Gasoline;
    if (s == "diesel" || s == "D") return Fuel::Diesel;
    throw ValidationError("unknown fuel type: '" + s + "' (expected gasoline or diesel)");
}

/// The three pollutants tracked end to end. CO is carried in mg/m3, NOx and
/// PM2.5 in ug/m3; exposure-response coefficients use the same units.
enum class Pollutant { CO = 0, NOx = 1, PM25 = 2 };

inline constexpr int kPollutantCount = 3;

inline constexpr std::array<Pollutant, kPollutantCount> all_pollutants()
{
    return {Pollutant::CO, Pollutant::NOx, Pollutant::PM25};
}

inline const char* to_string(Pollutant p)
{
    switch (p) {
    case Pollutant::CO: return "CO";
    case Pollutant::NOx: return "NOx";
    default: return "PM2.5";
    }
}

inline Pollutant pollutant_from_string(const std::string& s)
{
    if (s == "CO") return Pollutant::CO;
    if (s == "NOx") return Pollutant::NOx;
    if (s == "PM2.5" || s == "PM25") return Pollutant::PM25;
    throw ValidationError("unknown pollutant: '" + s + "'");
}

inline int index_of(Pollutant p)
{
    return static_cast<int>(p);
}

// ---------------------------------------------------------------------------
// Fleet
// ---------------------------------------------------------------------------

struct VehicleClass {
    std::string id;    // unique identifier, e.g. "SPV-G"
    std::string label; // display label; defaults to id
    Fuel fuel = Fuel::Gasoline;
};

/// Per-class fleet constants. Emission factors are indexed by Pollutant.
struct FleetEntry {
    VehicleClass vehicle;
    double baseline_vmt_km = 0.0;           // km/year per vehicle
    double fuel_economy_l_per_100km = 0.0;  // liters per 100 km
    std::array<double, kPollutantCount> emission_factor_g_per_km{}; // g/km
    std::string source; // provenance annotation, carried through from the parameter file

    void validate() const
    {
        if (vehicle.id.empty())
            throw ValidationError("fleet entry with empty vehicle class id");
        if (!(baseline_vmt_km > 0.0))
            throw ValidationError("fleet class '" + vehicle.id + "': baseline VMT must be positive");
        if (!(fuel_economy_l_per_100km > 0.0))
            throw ValidationError("fleet class '" + vehicle.id + "': fuel economy must be positive");
        for (Pollutant p : all_pollutants()) {
            if (!(emission_factor_g_per_km[index_of(p)] > 0.0))
                throw ValidationError("fleet class '" + vehicle.id + "': missing or non-positive " +
                                      std::string(to_string(p)) + " emission factor");
        }
    }
};

struct FleetParams {
    std::vector<FleetEntry> entries;

    const FleetEntry* find(const std::string& class_id) const
    {
        for (const auto& e : entries)
            if (e.vehicle.id == class_id) return &e;
        return nullptr;
    }

    const FleetEntry& at(const std::string& class_id) const
    {
        if (const FleetEntry* e = find(class_id)) return *e;
        throw ValidationError("no fleet parameters for vehicle class '" + class_id + "'");
    }

    void validate() const
    {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            entries[i].validate();
            for (std::size_t j = i + 1; j < entries.size(); ++j)
                if (entries[i].vehicle.id == entries[j].vehicle.id)
                    throw ValidationError("duplicate vehicle class id '" + entries[i].vehicle.id + "'");
        }
    }
};

// ---------------------------------------------------------------------------
// Pollutant, population, and valuation parameters
// ---------------------------------------------------------------------------

/// Background/baseline concentrations, baseline emissions and the acute
/// exposure-response coefficient for one pollutant. Emissions are carried in
/// units of 10^4 tons/year; the ER coefficient is percent mortality change
/// per concentration unit (mg/m3 for CO, ug/m3 otherwise).
struct PollutantParams {
    Pollutant pollutant = Pollutant::CO;
    double background_concentration = 0.0; // b_k
    double baseline_concentration = 0.0;   // C_k1
    double baseline_emissions_e4t = 0.0;   // E_k1, 10^4 tons/year
    double er_coefficient_pct = 0.0;       // percent per unit concentration
    std::string source;

    void validate() const
    {
        const std::string name = to_string(pollutant);
        if (!(background_concentration > 0.0))
            throw ValidationError(name + ": background concentration must be positive");
        if (!(baseline_concentration > background_concentration))
            throw ValidationError(name + ": baseline concentration must exceed background");
        if (!(baseline_emissions_e4t > 0.0))
            throw ValidationError(name + ": baseline emissions must be positive");
        if (!(er_coefficient_pct > 0.0))
            throw ValidationError(name + ": ER coefficient must be positive");
    }
};

struct PollutantTable {
    std::array<PollutantParams, kPollutantCount> params{};

    const PollutantParams& at(Pollutant p) const { return params[index_of(p)]; }
    PollutantParams& at(Pollutant p) { return params[index_of(p)]; }

    void validate() const
    {
        for (Pollutant p : all_pollutants()) {
            if (params[index_of(p)].pollutant != p)
                throw ValidationError("pollutant table entry out of order");
            params[index_of(p)].validate();
        }
    }
};

struct PopulationParams {
    double exposed_population = 0.0; // persons
    double mortality_rate = 0.0;     // fraction per year

    void validate() const
    {
        if (!(exposed_population > 0.0))
            throw ValidationError("exposed population must be positive");
        if (!(mortality_rate > 0.0 && mortality_rate < 1.0))
            throw ValidationError("mortality rate must lie in (0,1)");
    }
};

/// Value-of-statistical-life transfer inputs. The willingness-to-pay
/// elasticity defaults to 1 (linear income scaling).
struct ValuationParams {
    double vosl_baseline = 0.0;  // currency
    double income_baseline = 1.0;
    double income = 1.0;
    double wtp_elasticity = 1.0;
    std::string source;

    void validate() const
    {
        if (!(vosl_baseline > 0.0)) throw ValidationError("baseline VOSL must be positive");
        if (!(income_baseline > 0.0)) throw ValidationError("baseline income must be positive");
        if (!(income > 0.0)) throw ValidationError("income must be positive");
        if (!(wtp_elasticity > 0.0)) throw ValidationError("WTP elasticity must be positive");
    }
};

// ---------------------------------------------------------------------------
// Small data-model operations
// ---------------------------------------------------------------------------

/// Scale a national baseline VMT to a province by the ratio of transport
/// distance indices. Callers combine passenger/freight indices upstream.
inline double derive_vmt(double baseline_vmt_km, double provincial_distance_index,
                         double national_distance_index)
{
    if (!(provincial_distance_index > 0.0) || !(national_distance_index > 0.0))
        throw ValidationError("distance indices must be positive");
    return baseline_vmt_km * provincial_distance_index / national_distance_index;
}

/// Convert PM10 emissions to PM2.5 by a fixed mass fraction.
inline double pm10_to_pm25(double pm10_emissions_e4t, double factor)
{
    if (!(factor > 0.0 && factor <= 1.0))
        throw ValidationError("PM10->PM2.5 conversion factor must lie in (0,1]");
    if (pm10_emissions_e4t < 0.0)
        throw ValidationError("PM10 emissions must be nonnegative");
    return pm10_emissions_e4t * factor;
}

} // namespace fuelshock
