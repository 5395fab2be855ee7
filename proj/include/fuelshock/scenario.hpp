#pragma once

#include "fuelshock/emissions.hpp"
#include "fuelshock/impact.hpp"
#include "fuelshock/params_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fuelshock {

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// A fuel-price shock: one fraction per price group (fuel). A shock of 0.25
/// raises that group's prices by 25%.
struct Scenario {
    std::string id;
    std::string label;
    std::map<Fuel, double> price_shock;
    std::string notes;

    double shock_for(Fuel f) const
    {
        auto it = price_shock.find(f);
        if (it == price_shock.end())
            throw ValidationError("scenario '" + id + "' defines no shock for price group '" +
                                  to_string(f) + "'");
        return it->second;
    }

    void validate() const
    {
        if (id.empty()) throw ValidationError("scenario with empty id");
        for (const auto& [fuel, s] : price_shock)
            if (!(s > -1.0))
                throw ValidationError("scenario '" + id + "': shock " + format_double(s) +
                                      " would make " + to_string(fuel) + " prices non-positive");
    }
};

inline std::vector<Scenario> load_scenarios(const std::filesystem::path& path)
{
    const std::string ctx = "scenario file " + path.string();
    if (!std::filesystem::exists(path))
        throw ValidationError(ctx + ": file does not exist");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(ctx + ": " + e.what());
    }
    if (!j.contains("scenarios") || !j.at("scenarios").is_array())
        throw ValidationError(ctx + ": missing 'scenarios' array");
    std::vector<Scenario> out;
    for (const auto& sj : j.at("scenarios")) {
        Scenario s;
        s.id = detail::require_string(sj, "id", ctx);
        s.label = sj.value("label", s.id);
        s.notes = sj.value("notes", "");
        if (!sj.contains("price_shock") || !sj.at("price_shock").is_object())
            throw ValidationError(ctx + ": scenario '" + s.id + "' missing price_shock object");
        for (const auto& [key, val] : sj.at("price_shock").items()) {
            if (!val.is_number())
                throw ValidationError(ctx + ": scenario '" + s.id + "' non-numeric shock");
            s.price_shock[fuel_from_string(key)] = val.get<double>();
        }
        s.validate();
        out.push_back(std::move(s));
    }
    if (out.empty()) throw ValidationError(ctx + ": no scenarios defined");
    return out;
}

// ---------------------------------------------------------------------------
// Shock application
// ---------------------------------------------------------------------------

/// How per-class emission elasticities combine under a shock. The mean rule
/// (average of pi_kj * shock_j over the classes) reproduces the bundled
/// reference table within rounding; the sum rule is the plain weighted sum
/// and is provided for sensitivity analysis.
enum class ShockAggregation { Mean, Sum };

inline const char* to_string(ShockAggregation a)
{
    return a == ShockAggregation::Mean ? "mean" : "sum";
}

/// Fractional emission change per pollutant for one scenario.
inline Eigen::VectorXd apply_shock(const Scenario& s, const EmissionElasticityTable& pi,
                                   ShockAggregation aggregation = ShockAggregation::Mean)
{
    s.validate();
    pi.validate();
    const int n = pi.n_classes();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(kPollutantCount);
    for (int j = 0; j < n; ++j) {
        const double shock = s.shock_for(pi.fuels[j]);
        for (Pollutant p : all_pollutants())
            out(index_of(p)) += pi.price(index_of(p), j) * shock;
    }
    if (aggregation == ShockAggregation::Mean) out /= double(n);
    return out;
}

// ---------------------------------------------------------------------------
// Impact report
// ---------------------------------------------------------------------------

struct ImpactCell {
    double emission_delta_e4t = 0.0;  // E_k1 * fractional change, 10^4 tons
    double emission_delta_frac = 0.0; // fractional change of emissions
    double concentration_baseline = 0.0;
    double concentration_scenario = 0.0;
    double concentration_delta = 0.0;
    double deaths_linear = 0.0;
    double deaths_nonlinear = 0.0;
    double losses_linear_millions = 0.0;
    double losses_nonlinear_millions = 0.0;
};

struct ScenarioResult {
    Scenario scenario;
    std::array<ImpactCell, kPollutantCount> cells{};
    double total_emission_delta_e4t = 0.0;
    double total_deaths_linear = 0.0;
    double total_deaths_nonlinear = 0.0;
    double total_losses_linear_millions = 0.0;
    double total_losses_nonlinear_millions = 0.0;
};

struct ImpactReport {
    std::vector<ScenarioResult> scenarios;
    double vosl = 0.0;
    ShockAggregation aggregation = ShockAggregation::Mean;
};

/// Full chain for one scenario: emission elasticities x shock -> emission
/// change -> concentration change -> linear and nonlinear deaths -> money.
/// All values are carried at full precision; rounding happens only when a
/// report is formatted.
inline ScenarioResult run_scenario(const Scenario& s, const EmissionElasticityTable& pi,
                                   const PollutantTable& pollutants,
                                   const PopulationParams& population,
                                   const ValuationParams& valuation,
                                   ShockAggregation aggregation = ShockAggregation::Mean)
{
    const Eigen::VectorXd frac = apply_shock(s, pi, aggregation);
    const double vosl = vosl_transfer(valuation);

    ScenarioResult r;
    r.scenario = s;
    for (Pollutant p : all_pollutants()) {
        const int k = index_of(p);
        const PollutantParams& pp = pollutants.at(p);
        ImpactCell& c = r.cells[k];
        c.emission_delta_frac = frac(k);
        c.emission_delta_e4t = pp.baseline_emissions_e4t * frac(k);
        const ConcentrationDelta cd = scale_concentration(pp, 1.0 + frac(k));
        c.concentration_baseline = cd.baseline;
        c.concentration_scenario = cd.scenario;
        c.concentration_delta = cd.delta;
        c.deaths_linear = linear_acute_deaths(cd.delta, pp.er_coefficient_pct, population);
        c.deaths_nonlinear = nonlinear_death_delta(pp, population, cd.baseline, cd.scenario);
        c.losses_linear_millions = monetize_millions(c.deaths_linear, vosl);
        c.losses_nonlinear_millions = monetize_millions(c.deaths_nonlinear, vosl);

        r.total_emission_delta_e4t += c.emission_delta_e4t;
        r.total_deaths_linear += c.deaths_linear;
        r.total_deaths_nonlinear += c.deaths_nonlinear;
        r.total_losses_linear_millions += c.losses_linear_millions;
        r.total_losses_nonlinear_millions += c.losses_nonlinear_millions;
    }
    return r;
}

inline ImpactReport run_scenarios(const std::vector<Scenario>& scenarios,
                                  const EmissionElasticityTable& pi,
                                  const PollutantTable& pollutants,
                                  const PopulationParams& population,
                                  const ValuationParams& valuation,
                                  ShockAggregation aggregation = ShockAggregation::Mean)
{
    ImpactReport rep;
    rep.vosl = vosl_transfer(valuation);
    rep.aggregation = aggregation;
    for (const auto& s : scenarios)
        rep.scenarios.push_back(
            run_scenario(s, pi, pollutants, population, valuation, aggregation));
    return rep;
}

/// Wide report table, one row per scenario x pollutant plus a TOTAL row,
/// values formatted to 3 decimals.
inline std::string report_to_csv(const ImpactReport& rep)
{
    std::string out =
        "scenario,pollutant,emission_delta_e4t,emission_delta_pct,concentration_delta,"
        "deaths_linear,losses_linear_millions,deaths_nonlinear,losses_nonlinear_millions\n";
    for (const auto& sr : rep.scenarios) {
        for (Pollutant p : all_pollutants()) {
            const ImpactCell& c = sr.cells[index_of(p)];
            out += sr.scenario.id;
            out += ',';
            out += to_string(p);
            out += ',' + format_fixed(c.emission_delta_e4t, 3);
            out += ',' + format_fixed(100.0 * c.emission_delta_frac, 3);
            out += ',' + format_fixed(c.concentration_delta, 3);
            out += ',' + format_fixed(c.deaths_linear, 3);
            out += ',' + format_fixed(c.losses_linear_millions, 3);
            out += ',' + format_fixed(c.deaths_nonlinear, 3);
            out += ',' + format_fixed(c.losses_nonlinear_millions, 3);
            out += '\n';
        }
        out += sr.scenario.id;
        out += ",TOTAL," + format_fixed(sr.total_emission_delta_e4t, 3);
        out += ",,";
        out += ',' + format_fixed(sr.total_deaths_linear, 3);
        out += ',' + format_fixed(sr.total_losses_linear_millions, 3);
        out += ',' + format_fixed(sr.total_deaths_nonlinear, 3);
        out += ',' + format_fixed(sr.total_losses_nonlinear_millions, 3);
        out += '\n';
    }
    return out;
}

/// Structured-text form of the report with full-precision values.
inline std::string report_to_json(const ImpactReport& rep)
{
    nlohmann::ordered_json j;
    j["type"] = "impact_report";
    j["aggregation"] = to_string(rep.aggregation);
    j["vosl"] = rep.vosl;
    nlohmann::ordered_json scenarios = nlohmann::ordered_json::array();
    for (const auto& sr : rep.scenarios) {
        nlohmann::ordered_json sj;
        sj["id"] = sr.scenario.id;
        sj["label"] = sr.scenario.label;
        nlohmann::ordered_json cells = nlohmann::ordered_json::array();
        for (Pollutant p : all_pollutants()) {
            const ImpactCell& c = sr.cells[index_of(p)];
            cells.push_back({{"pollutant", to_string(p)},
                             {"emission_delta_e4t", c.emission_delta_e4t},
                             {"emission_delta_pct", 100.0 * c.emission_delta_frac},
                             {"concentration_baseline", c.concentration_baseline},
                             {"concentration_scenario", c.concentration_scenario},
                             {"concentration_delta", c.concentration_delta},
                             {"deaths_linear", c.deaths_linear},
                             {"losses_linear_millions", c.losses_linear_millions},
                             {"deaths_nonlinear", c.deaths_nonlinear},
                             {"losses_nonlinear_millions", c.losses_nonlinear_millions}});
        }
        sj["pollutants"] = std::move(cells);
        sj["totals"] = {{"emission_delta_e4t", sr.total_emission_delta_e4t},
                        {"deaths_linear", sr.total_deaths_linear},
                        {"losses_linear_millions", sr.total_losses_linear_millions},
                        {"deaths_nonlinear", sr.total_deaths_nonlinear},
                        {"losses_nonlinear_millions", sr.total_losses_nonlinear_millions}};
        scenarios.push_back(std::move(sj));
    }
    j["scenarios"] = std::move(scenarios);
    return j.dump(2) + "\n";
}

/// Long-format export (scenario,pollutant,metric,value) for plotting tools.
inline std::string report_to_long_csv(const ImpactReport& rep)
{
    std::string out = "scenario,pollutant,metric,value\n";
    const auto emit = [&out](const std::string& s, const std::string& p, const char* metric,
                             double v) {
        out += s + ',' + p + ',' + metric + ',' + format_double(v) + '\n';
    };
    for (const auto& sr : rep.scenarios) {
        for (Pollutant p : all_pollutants()) {
            const ImpactCell& c = sr.cells[index_of(p)];
            const std::string pol = to_string(p);
            emit(sr.scenario.id, pol, "emission_delta_e4t", c.emission_delta_e4t);
            emit(sr.scenario.id, pol, "emission_delta_pct", 100.0 * c.emission_delta_frac);
            emit(sr.scenario.id, pol, "concentration_delta", c.concentration_delta);
            emit(sr.scenario.id, pol, "deaths_linear", c.deaths_linear);
            emit(sr.scenario.id, pol, "losses_linear_millions", c.losses_linear_millions);
            emit(sr.scenario.id, pol, "deaths_nonlinear", c.deaths_nonlinear);
            emit(sr.scenario.id, pol, "losses_nonlinear_millions", c.losses_nonlinear_millions);
        }
        emit(sr.scenario.id, "TOTAL", "emission_delta_e4t", sr.total_emission_delta_e4t);
        emit(sr.scenario.id, "TOTAL", "deaths_linear", sr.total_deaths_linear);
        emit(sr.scenario.id, "TOTAL", "losses_linear_millions", sr.total_losses_linear_millions);
        emit(sr.scenario.id, "TOTAL", "deaths_nonlinear", sr.total_deaths_nonlinear);
        emit(sr.scenario.id, "TOTAL", "losses_nonlinear_millions",
             sr.total_losses_nonlinear_millions);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Comparison against published reference values
// ---------------------------------------------------------------------------

struct PublishedValue {
    std::string scenario_id;
    std::string pollutant; // "CO", "NOx", "PM2.5" or "TOTAL"
    std::string metric;
    double value = 0.0;
};

inline std::vector<PublishedValue> load_published_values(const std::filesystem::path& path)
{
    const std::string ctx = "published results file " + path.string();
    if (!std::filesystem::exists(path))
        throw ValidationError(ctx + ": file does not exist");
    csv::Table t = csv::parse(read_file(path), ctx);
    const int c_s = t.require_column("scenario", ctx);
    const int c_p = t.require_column("pollutant", ctx);
    const int c_m = t.require_column("metric", ctx);
    const int c_v = t.require_column("value", ctx);
    std::vector<PublishedValue> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        PublishedValue v;
        v.scenario_id = t.rows[i][c_s];
        v.pollutant = t.rows[i][c_p];
        v.metric = t.rows[i][c_m];
        v.value = csv::to_double(t.rows[i][c_v], ctx + ", row " + std::to_string(i + 1));
        out.push_back(std::move(v));
    }
    return out;
}

struct ComparisonCell {
    std::string scenario_id;
    std::string pollutant;
    std::string metric;
    double computed = 0.0;
    double published = 0.0;
    double abs_error = 0.0;
    double rel_error = 0.0;
    std::string rule;
    bool pass = false;
};

struct Comparison {
    std::vector<ComparisonCell> cells;
    int failures = 0;
    bool all_pass() const { return failures == 0; }
};

namespace detail {

inline double round3(double x)
{
    return std::round(x * 1000.0) / 1000.0;
}

/// Tolerance semantics, pinned per metric:
///  - emission changes (tons and %): 0.6% relative;
///  - concentration deltas: compared at the published 3-decimal precision
///    with an absolute band of 0.002;
///  - death counts: relative band (1% linear, 1.5% nonlinear) plus 0.5
///    deaths, because the reference values are printed as whole persons;
///  - monetary losses: same relative bands, no quantization term.
inline ComparisonCell compare_cell(const std::string& scen, const std::string& pol,
                                   const std::string& metric, double computed, double published)
{
    ComparisonCell c;
    c.scenario_id = scen;
    c.pollutant = pol;
    c.metric = metric;
    c.computed = computed;
    c.published = published;
    c.abs_error = std::abs(computed - published);
    c.rel_error = published != 0.0 ? c.abs_error / std::abs(published)
                                   : (computed == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (metric == "emission_delta_e4t" || metric == "emission_delta_pct") {
        c.rule = "rel<=0.6%";
        c.pass = c.rel_error <= 0.006;
    } else if (metric == "concentration_delta") {
        c.rule = "3dp+/-0.002";
        c.pass = std::abs(round3(computed) - published) <= 0.002 + 1e-9;
    } else if (metric == "deaths_linear") {
        c.rule = "rel<=1%+0.5";
        c.pass = c.abs_error <= 0.01 * std::abs(published) + 0.5;
    } else if (metric == "losses_linear_millions") {
        c.rule = "rel<=1%";
        c.pass = c.rel_error <= 0.01;
    } else if (metric == "deaths_nonlinear") {
        c.rule = "rel<=1.5%+0.5";
        c.pass = c.abs_error <= 0.015 * std::abs(published) + 0.5;
    } else if (metric == "losses_nonlinear_millions") {
        c.rule = "rel<=1.5%";
        c.pass = c.rel_error <= 0.015;
    } else {
        throw ValidationError("unknown comparison metric '" + metric + "'");
    }
    return c;
}

} // namespace detail

inline Comparison compare_to_published(const ImpactReport& report,
                                       const std::vector<PublishedValue>& published)
{
    Comparison out;
    for (const auto& pv : published) {
        const ScenarioResult* sr = nullptr;
        for (const auto& s : report.scenarios)
            if (s.scenario.id == pv.scenario_id) sr = &s;
        if (!sr) continue; // published rows for scenarios not in this run are skipped

        double computed = 0.0;
        if (pv.pollutant == "TOTAL") {
            if (pv.metric == "emission_delta_e4t") computed = sr->total_emission_delta_e4t;
            else if (pv.metric == "deaths_linear") computed = sr->total_deaths_linear;
            else if (pv.metric == "losses_linear_millions") computed = sr->total_losses_linear_millions;
            else if (pv.metric == "deaths_nonlinear") computed = sr->total_deaths_nonlinear;
            else if (pv.metric == "losses_nonlinear_millions") computed = sr->total_losses_nonlinear_millions;
            else throw ValidationError("unknown TOTAL metric '" + pv.metric + "'");
        } else {
            const ImpactCell& c = sr->cells[index_of(pollutant_from_string(pv.pollutant))];
            if (pv.metric == "emission_delta_e4t") computed = c.emission_delta_e4t;
            else if (pv.metric == "emission_delta_pct") computed = 100.0 * c.emission_delta_frac;
            else if (pv.metric == "concentration_delta") computed = c.concentration_delta;
            else if (pv.metric == "deaths_linear") computed = c.deaths_linear;
            else if (pv.metric == "losses_linear_millions") computed = c.losses_linear_millions;
            else if (pv.metric == "deaths_nonlinear") computed = c.deaths_nonlinear;
            else if (pv.metric == "losses_nonlinear_millions") computed = c.losses_nonlinear_millions;
            else throw ValidationError("unknown metric '" + pv.metric + "'");
        }
        ComparisonCell cell =
            detail::compare_cell(pv.scenario_id, pv.pollutant, pv.metric, computed, pv.value);
        if (!cell.pass) ++out.failures;
        out.cells.push_back(std::move(cell));
    }
    return out;
}

inline std::string comparison_to_csv(const Comparison& c)
{
    std::string out =
        "scenario,pollutant,metric,computed,published,abs_error,rel_error,rule,status\n";
    for (const auto& cell : c.cells) {
        out += cell.scenario_id + ',' + cell.pollutant + ',' + cell.metric;
        out += ',' + format_double(cell.computed);
        out += ',' + format_double(cell.published);
        out += ',' + format_double(cell.abs_error);
        out += ',' + format_double(cell.rel_error);
        out += ',' + cell.rule;
        out += cell.pass ? ",PASS\n" : ",FAIL\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reproduction runs
// ---------------------------------------------------------------------------

struct ReproduceResult {
    ImpactReport report;
    Comparison comparison;
};

/// Run every configured scenario against the bundled reference inputs
/// (parameters, scenario definitions, emission price elasticities) and
/// compare cell by cell against the published reference values.
inline ReproduceResult reproduce_published(const std::filesystem::path& param_dir,
                                           const std::vector<std::string>& only_scenarios = {})
{
    const auto need = [&](const char* name) {
        std::filesystem::path p = param_dir / name;
        if (!std::filesystem::exists(p))
            throw ValidationError("missing parameter file: " + p.string());
        return p;
    };
    const ParameterSet params = load_parameters(need("parameters.json"));
    std::vector<Scenario> scenarios = load_scenarios(need("scenarios.json"));
    const EmissionElasticityTable pi =
        load_emission_price_elasticities(need("emission_price_elasticities.csv"));
    const std::vector<PublishedValue> published =
        load_published_values(need("published_results.csv"));

    if (!only_scenarios.empty()) {
        std::vector<Scenario> filtered;
        for (const auto& s : scenarios)
            if (std::find(only_scenarios.begin(), only_scenarios.end(), s.id) !=
                only_scenarios.end())
                filtered.push_back(s);
        if (filtered.empty())
            throw ValidationError("no configured scenario matches the requested ids");
        scenarios = std::move(filtered);
    }

    ReproduceResult r;
    r.report = run_scenarios(scenarios, pi, params.pollutants, params.population,
                             params.valuation, ShockAggregation::Mean);
    r.comparison = compare_to_published(r.report, published);
    return r;
}

} // namespace fuelshock
