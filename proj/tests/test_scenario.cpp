#include "fuelshock/scenario.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

using namespace fuelshock;

namespace {

struct ReferenceInputs {
    ParameterSet params;
    std::vector<Scenario> scenarios;
    EmissionElasticityTable pi;
};

ReferenceInputs load_reference()
{
    const auto dir = testutil::data_dir() / "paper";
    return {load_parameters(dir / "parameters.json"), load_scenarios(dir / "scenarios.json"),
            load_emission_price_elasticities(dir / "emission_price_elasticities.csv")};
}

Scenario uniform_shock(double s)
{
    Scenario sc;
    sc.id = "T";
    sc.label = "test";
    sc.price_shock = {{Fuel::Gasoline, s}, {Fuel::Diesel, s}};
    return sc;
}

void copy_reference_dir(const std::filesystem::path& dst)
{
    std::filesystem::create_directories(dst);
    for (const char* name : {"parameters.json", "scenarios.json",
                             "emission_price_elasticities.csv", "published_results.csv"})
        std::filesystem::copy_file(testutil::data_dir() / "paper" / name, dst / name);
}

} // namespace

TEST_CASE("apply_shock implements the mean rule")
{
    const ReferenceInputs ref = load_reference();

    SECTION("uniform shock reduces to the column-sum arithmetic")
    {
        const Eigen::VectorXd frac = apply_shock(uniform_shock(0.25), ref.pi);
        for (Pollutant p : all_pollutants()) {
            const int k = index_of(p);
            const double expected = ref.pi.price.row(k).sum() * 0.25 / 10.0;
            CHECK_THAT(frac(k), Catch::Matchers::WithinAbs(expected, 1e-15));
        }
        // and lands near the published percentage changes
        CHECK_THAT(100.0 * frac(index_of(Pollutant::CO)),
                   Catch::Matchers::WithinRel(-1.074, 0.005));
        CHECK_THAT(100.0 * frac(index_of(Pollutant::NOx)),
                   Catch::Matchers::WithinRel(-2.594, 0.005));
        CHECK_THAT(100.0 * frac(index_of(Pollutant::PM25)),
                   Catch::Matchers::WithinRel(-1.390, 0.005));
    }
    SECTION("the 5% scenario stays within half a percent of the reference")
    {
        const Eigen::VectorXd frac = apply_shock(uniform_shock(0.05), ref.pi);
        CHECK_THAT(100.0 * frac(index_of(Pollutant::NOx)),
                   Catch::Matchers::WithinRel(-0.519, 0.005));
    }
    SECTION("zero shock, zero change")
    {
        CHECK(apply_shock(uniform_shock(0.0), ref.pi).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SECTION("antisymmetric in the shock")
    {
        const Eigen::VectorXd up = apply_shock(uniform_shock(0.01), ref.pi);
        const Eigen::VectorXd dn = apply_shock(uniform_shock(-0.01), ref.pi);
        CHECK((up + dn).lpNorm<Eigen::Infinity>() < 1e-18);
    }
    SECTION("sum aggregation is the mean rule times the class count")
    {
        const Eigen::VectorXd mean = apply_shock(uniform_shock(0.1), ref.pi);
        const Eigen::VectorXd sum =
            apply_shock(uniform_shock(0.1), ref.pi, ShockAggregation::Sum);
        CHECK((sum - 10.0 * mean).lpNorm<Eigen::Infinity>() < 1e-15);
    }
    SECTION("every price group needs a shock")
    {
        Scenario sc;
        sc.id = "gas-only";
        sc.price_shock = {{Fuel::Gasoline, 0.1}};
        CHECK_THROWS_MATCHES(apply_shock(sc, ref.pi), ValidationError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("diesel")));
    }
    SECTION("a shock at or below -100% is invalid")
    {
        CHECK_THROWS_AS(uniform_shock(-1.0).validate(), ValidationError);
        CHECK_NOTHROW(uniform_shock(-0.99).validate());
    }
}

TEST_CASE("run_scenario composes the full impact chain")
{
    const ReferenceInputs ref = load_reference();

    SECTION("totals are exact sums of the per-pollutant cells")
    {
        const ScenarioResult r = run_scenario(uniform_shock(0.25), ref.pi, ref.params.pollutants,
                                              ref.params.population, ref.params.valuation);
        double e = 0, dl = 0, dn = 0, ll = 0, ln = 0;
        for (const auto& c : r.cells) {
            e += c.emission_delta_e4t;
            dl += c.deaths_linear;
            dn += c.deaths_nonlinear;
            ll += c.losses_linear_millions;
            ln += c.losses_nonlinear_millions;
        }
        CHECK_THAT(r.total_emission_delta_e4t, Catch::Matchers::WithinAbs(e, 1e-9));
        CHECK_THAT(r.total_deaths_linear, Catch::Matchers::WithinAbs(dl, 1e-9));
        CHECK_THAT(r.total_deaths_nonlinear, Catch::Matchers::WithinAbs(dn, 1e-9));
        CHECK_THAT(r.total_losses_linear_millions, Catch::Matchers::WithinAbs(ll, 1e-9));
        CHECK_THAT(r.total_losses_nonlinear_millions, Catch::Matchers::WithinAbs(ln, 1e-9));
    }
    SECTION("zero shock produces an all-zero row set")
    {
        const ScenarioResult r = run_scenario(uniform_shock(0.0), ref.pi, ref.params.pollutants,
                                              ref.params.population, ref.params.valuation);
        for (const auto& c : r.cells) {
            CHECK(c.emission_delta_e4t == 0.0);
            CHECK(c.concentration_delta == 0.0);
            CHECK(c.deaths_linear == 0.0);
            CHECK(c.deaths_nonlinear == 0.0);
            CHECK(c.losses_nonlinear_millions == 0.0);
        }
    }
    SECTION("positive shock with an all-negative table moves every delta down")
    {
        const ScenarioResult r = run_scenario(uniform_shock(0.10), ref.pi, ref.params.pollutants,
                                              ref.params.population, ref.params.valuation);
        for (const auto& c : r.cells) {
            CHECK(c.emission_delta_e4t < 0.0);
            CHECK(c.emission_delta_frac < 0.0);
            CHECK(c.concentration_delta < 0.0);
            CHECK(c.deaths_linear < 0.0);
            CHECK(c.deaths_nonlinear < 0.0);
            CHECK(c.losses_linear_millions < 0.0);
            CHECK(c.losses_nonlinear_millions < 0.0);
        }
    }
}

TEST_CASE("impact report formatting")
{
    const ReferenceInputs ref = load_reference();
    const ImpactReport report =
        run_scenarios(ref.scenarios, ref.pi, ref.params.pollutants, ref.params.population,
                      ref.params.valuation);

    const std::string wide = report_to_csv(report);
    const std::string wide_again = report_to_csv(report);
    CHECK(wide == wide_again); // formatting is deterministic

    // one header + 4 scenarios x (3 pollutants + TOTAL)
    CHECK(std::count(wide.begin(), wide.end(), '\n') == 1 + 4 * 4);

    const std::string long_form = report_to_long_csv(report);
    CHECK(std::count(long_form.begin(), long_form.end(), '\n') == 1 + 4 * (3 * 7 + 5));
}

TEST_CASE("reproduction run against the bundled reference values")
{
    const ReproduceResult r = reproduce_published(testutil::data_dir() / "paper");
    CHECK(r.comparison.cells.size() == 104);
    for (const auto& cell : r.comparison.cells) {
        INFO(cell.scenario_id << " " << cell.pollutant << " " << cell.metric << ": computed "
                              << cell.computed << " published " << cell.published << " rule "
                              << cell.rule);
        CHECK(cell.pass);
    }
    CHECK(r.comparison.all_pass());

    const std::string grid = comparison_to_csv(r.comparison);
    CHECK(std::count(grid.begin(), grid.end(), '\n') == 105);
}

TEST_CASE("reproduction flags a tampered elasticity table")
{
    testutil::TempDir dir;
    copy_reference_dir(dir.path());
    // HDT-D NOx entry: -0.350 -> -3.50
    std::string pi = read_file(dir.file("emission_price_elasticities.csv"));
    const auto pos = pi.find("-0.350");
    REQUIRE(pos != std::string::npos);
    pi.replace(pos, 6, "-3.500");
    atomic_write_file(dir.file("emission_price_elasticities.csv"), pi);

    const ReproduceResult r = reproduce_published(dir.path());
    CHECK_FALSE(r.comparison.all_pass());
    bool nox_quantity_flagged = false;
    for (const auto& cell : r.comparison.cells)
        if (!cell.pass && cell.pollutant == "NOx" && cell.metric == "emission_delta_pct")
            nox_quantity_flagged = true;
    CHECK(nox_quantity_flagged);
}

TEST_CASE("reproduction can be restricted to a scenario subset")
{
    const ReproduceResult r = reproduce_published(testutil::data_dir() / "paper", {"S2"});
    CHECK(r.report.scenarios.size() == 1);
    CHECK(r.comparison.cells.size() == 26);
    for (const auto& cell : r.comparison.cells) CHECK(cell.scenario_id == "S2");

    CHECK_THROWS_AS(reproduce_published(testutil::data_dir() / "paper", {"NOPE"}),
                    ValidationError);
}

TEST_CASE("reproduction requires every parameter file")
{
    testutil::TempDir dir;
    copy_reference_dir(dir.path());
    std::filesystem::remove(dir.file("scenarios.json"));
    CHECK_THROWS_MATCHES(reproduce_published(dir.path()), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("scenarios.json")));
}

TEST_CASE("scenario config validation")
{
    testutil::TempDir dir;
    SECTION("well-formed file loads")
    {
        const auto scenarios = load_scenarios(testutil::data_dir() / "paper" / "scenarios.json");
        REQUIRE(scenarios.size() == 4);
        CHECK(scenarios[0].id == "S1");
        CHECK(scenarios[0].shock_for(Fuel::Gasoline) == 0.25);
        CHECK(scenarios[1].shock_for(Fuel::Diesel) == -0.35);
    }
    SECTION("a -100% shock is rejected at load time")
    {
        const auto path = testutil::write_temp(
            dir, "bad.json",
            R"({"scenarios":[{"id":"X","price_shock":{"gasoline":-1.0,"diesel":0.0}}]})");
        CHECK_THROWS_AS(load_scenarios(path), ValidationError);
    }
    SECTION("missing shock object is rejected")
    {
        const auto path =
            testutil::write_temp(dir, "bad2.json", R"({"scenarios":[{"id":"X"}]})");
        CHECK_THROWS_AS(load_scenarios(path), ValidationError);
    }
}
