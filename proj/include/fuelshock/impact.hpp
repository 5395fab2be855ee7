#pragma once

#include "fuelshock/types.hpp"

#include <cmath>
#include <string>

namespace fuelshock {

// ---------------------------------------------------------------------------
// Concentrations
// ---------------------------------------------------------------------------

/// Well-mixed box screening model: C = b + S L / (H u).
struct BoxModelParams {
    double emission_rate = 0.0; // S, ug/s/m^2
    double length_m = 0.0;      // L
    double mixing_height_m = 0.0;
    double wind_speed_m_s = 0.0;
    double background = 0.0; // b, same units as the output concentration

    void validate() const
    {
        if (!(length_m > 0.0) || !(mixing_height_m > 0.0) || !(wind_speed_m_s > 0.0))
            throw ValidationError("box model: L, H and u must be positive");
        if (emission_rate < 0.0)
            throw ValidationError("box model: emission rate must be nonnegative");
    }
};

inline double box_concentration(const BoxModelParams& p)
{
    p.validate();
    return p.background + p.emission_rate * p.length_m / (p.mixing_height_m * p.wind_speed_m_s);
}

struct ConcentrationDelta {
    Pollutant pollutant = Pollutant::CO;
    double baseline = 0.0; // C_k1
    double scenario = 0.0; // C_k2
    double delta = 0.0;    // C_k2 - C_k1
};

/// Under the box model the geometry cancels: the excess over background
/// scales with the emission ratio, C2 = b + (C1 - b) * E2/E1.
inline ConcentrationDelta scale_concentration(const PollutantParams& pp, double emission_ratio)
{
    if (emission_ratio < 0.0)
        throw ValidationError("scale_concentration: emission ratio must be nonnegative");
    if (!(pp.baseline_concentration > pp.background_concentration))
        throw ValidationError(std::string(to_string(pp.pollutant)) +
                              ": baseline concentration must exceed background");
    ConcentrationDelta d;
    d.pollutant = pp.pollutant;
    d.baseline = pp.baseline_concentration;
    d.scenario = pp.background_concentration +
                 (pp.baseline_concentration - pp.background_concentration) * emission_ratio;
    d.delta = d.scenario - d.baseline;
    return d;
}

// ---------------------------------------------------------------------------
// Mortality
// ---------------------------------------------------------------------------

/// ER coefficients are stored in percent mortality change per concentration
/// unit; this is the single site converting them to the natural-unit slope
/// used by both mortality models.
inline double er_slope_per_unit(double er_coefficient_pct)
{
    if (!std::isfinite(er_coefficient_pct))
        throw ValidationError("non-finite ER coefficient");
    return er_coefficient_pct / 100.0;
}

/// Linear acute-mortality response: deaths = (ER/100) * dC * N * M.
inline double linear_acute_deaths(double delta_concentration, double er_coefficient_pct,
                                  const PopulationParams& pop)
{
    if (!std::isfinite(delta_concentration))
        throw ValidationError("linear_acute_deaths: non-finite input");
    pop.validate();
    return er_slope_per_unit(er_coefficient_pct) * delta_concentration *
           pop.exposed_population * pop.mortality_rate;
}

struct MortalityResult {
    Pollutant pollutant = Pollutant::CO;
    double relative_risk = 1.0;        // RR = exp(beta (C - b))
    double attributable_fraction = 0.0; // AF = (RR - 1) / RR
    double deaths = 0.0;               // AF * N * M
};

/// Nonlinear acute-mortality level at concentration C (undefined below
/// background).
inline MortalityResult nonlinear_acute_deaths(double concentration, const PollutantParams& pp,
                                              const PopulationParams& pop)
{
    pp.validate();
    pop.validate();
    if (concentration < pp.background_concentration)
        throw ValidationError(std::string(to_string(pp.pollutant)) +
                              ": concentration below background; nonlinear model undefined");
    MortalityResult r;
    r.pollutant = pp.pollutant;
    const double beta = er_slope_per_unit(pp.er_coefficient_pct);
    r.relative_risk = std::exp(beta * (concentration - pp.background_concentration));
    r.attributable_fraction = (r.relative_risk - 1.0) / r.relative_risk;
    r.deaths = r.attributable_fraction * pop.exposed_population * pop.mortality_rate;
    return r;
}

/// Scenario-minus-baseline nonlinear deaths (difference of levels).
inline double nonlinear_death_delta(const PollutantParams& pp, const PopulationParams& pop,
                                    double baseline_concentration, double scenario_concentration)
{
    return nonlinear_acute_deaths(scenario_concentration, pp, pop).deaths -
           nonlinear_acute_deaths(baseline_concentration, pp, pop).deaths;
}

// ---------------------------------------------------------------------------
// Valuation
// ---------------------------------------------------------------------------

/// Benefit transfer of the value of a statistical life:
/// VOSL = VOSL_BL * (I / I_BL)^e.
inline double vosl_transfer(const ValuationParams& v)
{
    v.validate();
    return v.vosl_baseline * std::pow(v.income / v.income_baseline, v.wtp_elasticity);
}

/// Deaths valued at the VOSL, reported in millions of currency units.
inline double monetize_millions(double deaths, double vosl)
{
    if (!(vosl > 0.0))
        throw ValidationError("monetize: VOSL must be positive");
    return deaths * vosl / 1e6;
}

} // namespace fuelshock
