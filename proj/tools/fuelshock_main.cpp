#include "fuelshock/aids.hpp"
#include "fuelshock/elasticity.hpp"
#include "fuelshock/emissions.hpp"
#include "fuelshock/panel.hpp"
#include "fuelshock/params_io.hpp"
#include "fuelshock/scenario.hpp"
#include "fuelshock/serialize.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace fuelshock;

namespace {

// Exit codes, also documented in the README:
//   0 success, 1 internal error, 2 input/validation error,
//   3 rank-deficient regressors, 4 estimation did not converge,
//   5 reproduction comparison had failing cells.
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;
constexpr int kExitCollinear = 3;
constexpr int kExitNoConverge = 4;
constexpr int kExitComparisonFailed = 5;

fs::path default_params_dir()
{
    if (const char* env = std::getenv("FUELSHOCK_PARAMS"))
        return fs::path(env);
    return {};
}

fs::path resolve_in_params_dir(const std::string& given, const char* filename)
{
    if (!given.empty()) return fs::path(given);
    const fs::path dir = default_params_dir();
    if (dir.empty())
        throw ValidationError(std::string("no path given for ") + filename +
                              " and FUELSHOCK_PARAMS is not set");
    return dir / filename;
}

struct PointFile {
    Eigen::VectorXd shares;
    Eigen::VectorXd log_prices;
};

PointFile load_point_file(const fs::path& path)
{
    const std::string ctx = "evaluation point file " + path.string();
    if (!fs::exists(path)) throw ValidationError(ctx + ": file does not exist");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(ctx + ": " + e.what());
    }
    PointFile p;
    p.shares = detail::vector_from_json(j.at("shares"), ctx + " shares");
    p.log_prices = detail::vector_from_json(j.at("log_prices"), ctx + " log_prices");
    return p;
}

int run_validate(const std::string& panel_path, const std::string& params_path)
{
    FuelPanel panel = load_panel(panel_path);
    std::size_t groups = panel_groups(panel).size();
    if (!params_path.empty()) {
        const ParameterSet params = load_parameters(params_path);
        panel = derive_activity(std::move(panel), params.fleet);
        system_data_from_panel(panel); // share invariants
    }
    std::cout << "panel OK: " << panel.rows.size() << " rows, " << panel.classes.size()
              << " classes, " << groups << " groups"
              << (panel.derived ? ", shares derived" : "") << "\n";
    return kExitOk;
}

int run_estimate(const std::string& panel_path, const std::string& params_path,
                 const std::string& out_path, const std::string& model,
                 const std::string& index, double tol, int max_iter, const std::string& drop,
                 bool group_prices)
{
    const ParameterSet params = load_parameters(resolve_in_params_dir(params_path, "parameters.json"));
    FuelPanel panel = derive_activity(load_panel(panel_path), params.fleet);

    if (model == "double-log") {
        const DoubleLogFit fit = fit_double_log(panel);
        atomic_write_file(out_path, double_log_to_csv(fit));
        std::cerr << "double-log fit: " << fit.equations.size() << " equations written to "
                  << out_path << "\n";
        return kExitOk;
    }

    AidsOptions opt;
    opt.index = index == "stone" ? PriceIndex::Stone : PriceIndex::Translog;
    opt.tol = tol;
    opt.max_iter = max_iter;
    opt.group_prices = group_prices;
    if (!drop.empty()) {
        const int d = panel.class_index(drop);
        if (d < 0)
            throw ValidationError("--drop: unknown vehicle class '" + drop + "'");
        opt.dropped_equation = d;
    }
    const AidsFit fit = fit_aids(panel, opt);
    atomic_write_file(out_path, fit_to_json(fit));
    std::cerr << "aids fit: " << fit.iterations << " iterations, final change "
              << format_double(fit.final_change) << ", restriction residual "
              << format_double(fit.params.restriction_residual()) << ", dropped equation "
              << fit.dropped_good << "\n";
    return kExitOk;
}

int run_elasticities(const std::string& fit_path, const std::string& out_path,
                     const std::string& format, const std::string& at, bool emissions,
                     const std::string& params_path, const std::string& panel_path,
                     const std::string& pi_out, const std::string& eta_out,
                     const std::string& basis)
{
    if (!fs::exists(fit_path))
        throw ValidationError("fit file does not exist: " + fit_path);
    const AidsFit fit = fit_from_json(read_file(fit_path), "fit file " + fit_path);

    std::optional<Eigen::VectorXd> shares, log_prices;
    if (at != "means") {
        const PointFile p = load_point_file(at);
        shares = p.shares;
        log_prices = p.log_prices;
    }
    const ElasticityTable table = elasticity_table(fit, shares, log_prices, true);
    atomic_write_file(out_path, format == "json" ? elasticity_table_to_json(table)
                                                 : elasticity_table_to_csv(table));
    std::cerr << "elasticity table written to " << out_path << "\n";

    if (emissions) {
        if (params_path.empty() && default_params_dir().empty())
            throw ValidationError(
                "emission elasticities need fleet parameters: pass --params <parameters.json>");
        if (panel_path.empty())
            throw ValidationError(
                "emission elasticities need per-class activity: pass --panel <panel.csv>");
        const ParameterSet params =
            load_parameters(resolve_in_params_dir(params_path, "parameters.json"));
        FuelPanel panel = derive_activity(load_panel(panel_path), params.fleet);
        if (panel.classes != fit.goods)
            throw ValidationError("panel classes do not match the goods of the fit");
        const ActivityBasis ab =
            basis == "liters" ? ActivityBasis::FuelLiters : ActivityBasis::FleetKilometers;
        const EmissionWeights w = emission_weights(params.fleet, mean_activity(panel, ab));

        EmissionElasticityTable pi;
        pi.classes = fit.goods;
        for (const auto& g : fit.goods) pi.fuels.push_back(params.fleet.at(g).vehicle.fuel);
        pi.price = emission_price_elasticities(table.price, w);
        pi.expenditure = emission_expenditure_elasticity(table.expenditure, w);
        pi.validate();

        const std::string pi_path = pi_out.empty() ? "emission_price_elasticities.csv" : pi_out;
        atomic_write_file(pi_path, emission_table_to_csv(pi));
        std::string eta = "pollutant,eta\n";
        for (Pollutant p : all_pollutants())
            eta += std::string(to_string(p)) + ',' + format_double(pi.expenditure(index_of(p))) + '\n';
        const std::string eta_path =
            eta_out.empty() ? "emission_expenditure_elasticities.csv" : eta_out;
        atomic_write_file(eta_path, eta);
        std::cerr << "emission elasticities written to " << pi_path << " and " << eta_path << "\n";
    }
    return kExitOk;
}

int run_scenario_run(const std::string& config_path, const std::string& params_path,
                     const std::string& pi_path, const std::string& out_path,
                     const std::string& aggregate, const std::string& plot_data,
                     const std::string& format)
{
    const std::vector<Scenario> scenarios =
        load_scenarios(resolve_in_params_dir(config_path, "scenarios.json"));
    const ParameterSet params =
        load_parameters(resolve_in_params_dir(params_path, "parameters.json"));
    const EmissionElasticityTable pi = load_emission_price_elasticities(
        resolve_in_params_dir(pi_path, "emission_price_elasticities.csv"));
    const ShockAggregation agg =
        aggregate == "sum" ? ShockAggregation::Sum : ShockAggregation::Mean;

    const ImpactReport report =
        run_scenarios(scenarios, pi, params.pollutants, params.population, params.valuation, agg);
    const std::string text = format == "json" ? report_to_json(report) : report_to_csv(report);
    if (out_path.empty())
        std::cout << text;
    else
        atomic_write_file(out_path, text);
    if (!plot_data.empty())
        atomic_write_file(plot_data, report_to_long_csv(report));
    std::cerr << "scenario report: " << report.scenarios.size() << " scenarios, aggregation "
              << to_string(agg) << ", VOSL " << format_double(report.vosl) << "\n";
    return kExitOk;
}

int run_scenario_reproduce(const std::string& params_dir, const std::vector<std::string>& only,
                           const std::string& out_path)
{
    fs::path dir = params_dir.empty() ? default_params_dir() : fs::path(params_dir);
    if (dir.empty())
        throw ValidationError("no parameter directory: pass --params or set FUELSHOCK_PARAMS");

    const ReproduceResult r = reproduce_published(dir, only);
    const std::string grid = comparison_to_csv(r.comparison);
    if (out_path.empty())
        std::cout << grid;
    else
        atomic_write_file(out_path, grid);

    const int total = static_cast<int>(r.comparison.cells.size());
    std::cerr << "reproduction: " << (total - r.comparison.failures) << "/" << total
              << " cells within tolerance\n";
    for (const auto& c : r.comparison.cells)
        if (!c.pass)
            std::cerr << "  FAIL " << c.scenario_id << " " << c.pollutant << " " << c.metric
                      << ": computed " << format_double(c.computed) << " vs published "
                      << format_double(c.published) << " (rule " << c.rule << ")\n";
    return r.comparison.all_pass() ? kExitOk : kExitComparisonFailed;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"road-transport fuel demand, emissions and health-impact toolkit"};
    app.require_subcommand(1);

    // validate
    auto* validate = app.add_subcommand("validate", "validate a panel (and optionally parameters)");
    std::string v_panel, v_params;
    validate->add_option("--panel", v_panel, "panel CSV")->required();
    validate->add_option("--params", v_params, "parameter file (enables share derivation checks)");

    // estimate
    auto* estimate = app.add_subcommand("estimate", "fit the demand system");
    std::string e_panel, e_params, e_out, e_model = "aids", e_index = "translog", e_drop;
    double e_tol = 1e-8;
    int e_max_iter = 500;
    bool e_group_prices = false;
    estimate->add_option("--panel", e_panel, "panel CSV")->required();
    estimate->add_option("--params", e_params, "parameter file (fuel economy lookup)");
    estimate->add_option("--out", e_out, "output fit document")->required();
    estimate->add_option("--model", e_model, "aids | double-log")
        ->check(CLI::IsMember({"aids", "double-log"}));
    estimate->add_option("--index", e_index, "translog | stone")
        ->check(CLI::IsMember({"translog", "stone"}));
    estimate->add_option("--tol", e_tol, "convergence tolerance")->check(CLI::PositiveNumber);
    estimate->add_option("--max-iter", e_max_iter, "iteration cap")->check(CLI::PositiveNumber);
    estimate->add_option("--drop", e_drop, "vehicle class whose equation is dropped");
    estimate->add_flag("--group-prices", e_group_prices,
                       "pool goods sharing one price series into a group-level system");

    // elasticities
    auto* elast = app.add_subcommand("elasticities", "elasticity tables from a fit");
    std::string l_fit, l_out, l_format = "csv", l_at = "means", l_params, l_panel, l_pi, l_eta,
                l_basis = "km";
    bool l_emissions = false;
    elast->add_option("--fit", l_fit, "fit document from 'estimate'")->required();
    elast->add_option("--out", l_out, "output table path")->required();
    elast->add_option("--format", l_format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));
    elast->add_option("--at", l_at, "'means' or a point file with shares and log_prices");
    elast->add_flag("--emissions", l_emissions, "also compute emission elasticities");
    elast->add_option("--params", l_params, "parameter file (fleet emission factors)");
    elast->add_option("--panel", l_panel, "panel CSV (per-class activity)");
    elast->add_option("--pi-out", l_pi, "emission price elasticity output path");
    elast->add_option("--eta-out", l_eta, "emission expenditure elasticity output path");
    elast->add_option("--basis", l_basis, "activity basis: km | liters")
        ->check(CLI::IsMember({"km", "liters"}));

    // scenario
    auto* scenario = app.add_subcommand("scenario", "price-shock scenario runs");
    scenario->require_subcommand(1);
    auto* srun = scenario->add_subcommand("run", "run configured scenarios");
    std::string s_config, s_params, s_pi, s_out, s_agg = "mean", s_plot, s_format = "csv";
    srun->add_option("--config", s_config, "scenario config JSON");
    srun->add_option("--params", s_params, "parameter file");
    srun->add_option("--pi", s_pi, "emission price elasticity CSV");
    srun->add_option("--out", s_out, "report path (stdout when omitted)");
    srun->add_option("--aggregate", s_agg, "shock aggregation: mean | sum")
        ->check(CLI::IsMember({"mean", "sum"}));
    srun->add_option("--plot-data", s_plot, "also write a long-format CSV for plotting");
    srun->add_option("--format", s_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    auto* srep = scenario->add_subcommand("reproduce",
                                          "re-run the bundled reference table and compare");
    std::string r_params, r_out;
    std::vector<std::string> r_only;
    srep->add_option("--params", r_params, "reference parameter directory");
    srep->add_option("--scenario", r_only, "restrict to these scenario ids");
    srep->add_option("--out", r_out, "comparison grid path (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) return run_validate(v_panel, v_params);
        if (*estimate)
            return run_estimate(e_panel, e_params, e_out, e_model, e_index, e_tol, e_max_iter,
                                e_drop, e_group_prices);
        if (*elast)
            return run_elasticities(l_fit, l_out, l_format, l_at, l_emissions, l_params, l_panel,
                                    l_pi, l_eta, l_basis);
        if (*srun)
            return run_scenario_run(s_config, s_params, s_pi, s_out, s_agg, s_plot, s_format);
        if (*srep) return run_scenario_reproduce(r_params, r_only, r_out);
    } catch (const CollinearityError& e) {
        std::cerr << "error (rank deficiency): " << e.what() << "\n";
        return kExitCollinear;
    } catch (const ConvergenceError& e) {
        std::cerr << "error (non-convergence): " << e.what() << "\n";
        return kExitNoConverge;
    } catch (const ValidationError& e) {
        std::cerr << "error (invalid input): " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
